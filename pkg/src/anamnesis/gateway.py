"""Access to chat-completion and embedding backends.

Two interchangeable implementations: an OpenAI-compatible HTTP client and a
fully deterministic scripted backend for offline runs. Both expose
``chat_structured`` (tool-call with schema-validated arguments) and ``embed``
(unit vectors, input order preserved).
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import httpx
import jsonschema
import numpy as np

from .errors import (
    AuthError,
    BackendTimeout,
    DimensionMismatch,
    SchemaViolation,
    ScriptExhausted,
    TransportError,
)
from .graph import normalize_text

logger = logging.getLogger(__name__)

API_KEY_ENV = "ANAMNESIS_API_KEY"
BASE_URL_ENV = "ANAMNESIS_BASE_URL"


@dataclass
class BackendConfig:
    """Connection settings for an OpenAI-compatible server.

    The api_key is excluded from repr and from ``to_public_dict`` so it can
    never leak into logs, event records or serialized configs.
    """

    base_url: str = "https://api.openai.com/v1"
    api_key: Optional[str] = field(default=None, repr=False)
    chat_model: str = "gpt-4o"
    embed_model: str = "text-embedding-ada-002"
    timeout: float = 30.0
    max_retries: int = 2

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")

    @classmethod
    def from_env(cls, **overrides: Any) -> "BackendConfig":
        env: dict[str, Any] = {}
        if os.environ.get(BASE_URL_ENV):
            env["base_url"] = os.environ[BASE_URL_ENV]
        key = os.environ.get(API_KEY_ENV) or os.environ.get("OPENAI_API_KEY")
        if key:
            env["api_key"] = key
        env.update(overrides)
        return cls(**env)

    def to_public_dict(self) -> dict[str, Any]:
        return {
            "base_url": self.base_url,
            "chat_model": self.chat_model,
            "embed_model": self.embed_model,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
        }


@dataclass
class ToolCallRequest:
    """One structured chat call: dialogue messages plus the tool schema the
    reply must satisfy.

    ``response_schema`` optionally overrides the schema used to validate the
    returned arguments; the advertised ``tool_schema`` may be stricter (e.g.
    enum-constrained) than what the caller is willing to accept and filter.
    """

    messages: list[dict[str, str]]
    tool_schema: dict[str, Any]
    system_prompt: str = ""
    temperature: float = 0.0
    response_schema: Optional[dict[str, Any]] = None

    @property
    def tool_name(self) -> str:
        return self.tool_schema["name"]

    def validation_schema(self) -> dict[str, Any]:
        return self.response_schema or self.tool_schema["parameters"]

    def last_text(self) -> str:
        """Concatenated message text, used by scripted pattern matching."""
        return "\n".join(m.get("content", "") for m in self.messages)

    def with_corrective_note(self, note: str) -> "ToolCallRequest":
        messages = list(self.messages) + [{"role": "system", "content": note}]
        return ToolCallRequest(
            messages=messages,
            tool_schema=self.tool_schema,
            system_prompt=self.system_prompt,
            temperature=self.temperature,
            response_schema=self.response_schema,
        )


def validate_arguments(arguments: Any, schema: dict[str, Any]) -> dict[str, Any]:
    if not isinstance(arguments, dict):
        raise SchemaViolation(f"tool arguments must be an object, got {type(arguments).__name__}")
    try:
        jsonschema.validate(arguments, schema)
    except jsonschema.ValidationError as exc:
        raise SchemaViolation(exc.message) from None
    return arguments


class HttpBackend:
    """OpenAI-compatible client with bounded retry on transient failures.

    Total attempts per call never exceed 1 + max_retries. Auth failures and
    schema violations are not retried here; schema retries with a corrective
    note are the caller's business.
    """

    def __init__(
        self,
        config: BackendConfig,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
        backoff_base: float = 0.5,
    ) -> None:
        self.config = config
        self._sleep = sleep
        self._backoff_base = backoff_base
        headers = {}
        if config.api_key:
            headers["Authorization"] = f"Bearer {config.api_key}"
        self._client = httpx.Client(
            base_url=config.base_url.rstrip("/"),
            headers=headers,
            timeout=config.timeout,
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def _post_with_retry(self, path: str, payload: dict[str, Any]) -> dict[str, Any]:
        attempts = 1 + self.config.max_retries
        last_error: Exception = TransportError("no attempt made")
        for attempt in range(attempts):
            if attempt:
                self._sleep(self._backoff_base * (2 ** (attempt - 1)))
            try:
                response = self._client.post(path, json=payload)
            except httpx.TimeoutException as exc:
                last_error = BackendTimeout(str(exc))
                continue
            except httpx.TransportError as exc:
                last_error = TransportError(str(exc))
                continue
            if response.status_code in (401, 403):
                raise AuthError(f"backend rejected credentials ({response.status_code})")
            if response.status_code == 429 or response.status_code >= 500:
                last_error = TransportError(f"HTTP {response.status_code}: {response.text[:200]}")
                continue
            if response.status_code != 200:
                raise TransportError(f"HTTP {response.status_code}: {response.text[:200]}")
            return response.json()
        raise last_error

    def chat_structured(self, request: ToolCallRequest) -> dict[str, Any]:
        messages = []
        if request.system_prompt:
            messages.append({"role": "system", "content": request.system_prompt})
        messages.extend(request.messages)
        payload = {
            "model": self.config.chat_model,
            "temperature": request.temperature,
            "messages": messages,
            "tools": [{"type": "function", "function": request.tool_schema}],
            "tool_choice": {"type": "function", "function": {"name": request.tool_name}},
        }
        body = self._post_with_retry("/chat/completions", payload)
        try:
            call = body["choices"][0]["message"]["tool_calls"][0]["function"]
            arguments = json.loads(call["arguments"])
        except (KeyError, IndexError, TypeError) as exc:
            raise SchemaViolation(f"response carries no tool call: {exc}") from None
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"tool arguments are not valid JSON: {exc}") from None
        return validate_arguments(arguments, request.validation_schema())

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("embed requires at least one text")
        payload = {"model": self.config.embed_model, "input": list(texts)}
        body = self._post_with_retry("/embeddings", payload)
        try:
            rows = sorted(body["data"], key=lambda r: r["index"])
            vectors = [np.asarray(r["embedding"], dtype=np.float64) for r in rows]
        except (KeyError, TypeError) as exc:
            raise TransportError(f"malformed embeddings response: {exc}") from None
        if len(vectors) != len(texts):
            raise DimensionMismatch(
                f"expected {len(texts)} vectors, got {len(vectors)}"
            )
        return normalize_vectors(vectors)


def normalize_vectors(vectors: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Unit-normalize, enforcing one shared dimensionality."""
    dims = {v.shape for v in vectors}
    if len(dims) > 1:
        raise DimensionMismatch(f"inconsistent embedding dimensions: {sorted(dims)}")
    out = []
    for vector in vectors:
        norm = float(np.linalg.norm(vector))
        if norm == 0.0 or not np.isfinite(norm):
            raise DimensionMismatch("embedding vector is not normalizable (zero or non-finite norm)")
        out.append(vector / norm)
    return out


class HashEmbedder:
    """Deterministic offline embedder: each token of the normalized text is
    hashed to a fixed random unit vector and the token vectors are averaged.

    Texts sharing most of their words land close together, which is enough
    for clustering and near-duplicate tests without any network access.
    """

    def __init__(self, dim: int = 256, seed: int = 0) -> None:
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim
        self.seed = seed
        self._token_cache: dict[str, np.ndarray] = {}

    @property
    def embedder_id(self) -> str:
        return f"token-hash-v1-d{self.dim}-s{self.seed}"

    def _token_vector(self, token: str) -> np.ndarray:
        cached = self._token_cache.get(token)
        if cached is not None:
            return cached
        digest = hashlib.sha256(f"{self.seed}:{token}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        vector = rng.standard_normal(self.dim)
        vector /= np.linalg.norm(vector)
        self._token_cache[token] = vector
        return vector

    def embed_one(self, text: str) -> np.ndarray:
        tokens = normalize_text(text).split()
        if not tokens:
            raise ValueError(f"cannot embed empty text: {text!r}")
        mean = np.mean([self._token_vector(t) for t in tokens], axis=0)
        return normalize_vectors([mean])[0]

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("embed requires at least one text")
        return [self.embed_one(t) for t in texts]


# Tool name -> script operation kind.
TOOL_KINDS = {
    "node_decision": "decision",
    "category_facts": "facts",
    "symptomatic_summary": "summary",
    "question_generation": "question_gen",
}

SCRIPT_KINDS = set(TOOL_KINDS.values())


@dataclass
class ScriptRule:
    """One canned response. ``pattern`` is searched in the request text;
    a rule without a pattern is the default for its kind. ``times`` bounds
    how often the rule may fire (None = unlimited)."""

    kind: str
    response: dict[str, Any]
    pattern: Optional[str] = None
    times: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in SCRIPT_KINDS:
            raise ValueError(f"unknown script kind {self.kind!r}; expected one of {sorted(SCRIPT_KINDS)}")
        if self.pattern is not None:
            re.compile(self.pattern)
        if self.times is not None and self.times < 1:
            raise ValueError("times must be >= 1 when given")


class ScriptedBackend:
    """Deterministic stand-in for the LLM used as a test oracle.

    Rules are tried in order; the first one whose kind matches, whose
    pattern (if any) is found in the request text, and whose budget is not
    spent wins. No match is a hard error, never silence. Responses are
    validated against the same schema the real backend enforces.
    """

    def __init__(
        self,
        rules: Sequence[ScriptRule],
        embed_dim: int = 256,
        embedder_seed: int = 0,
    ) -> None:
        self._rules = [
            ScriptRule(r.kind, copy.deepcopy(r.response), r.pattern, r.times)
            for r in rules
        ]
        self._remaining = [r.times for r in self._rules]
        self._lock = threading.Lock()
        self.embedder = HashEmbedder(dim=embed_dim, seed=embedder_seed)
        self.calls: list[str] = []

    @classmethod
    def from_file(cls, path: str | Path, **kwargs: Any) -> "ScriptedBackend":
        with open(path, "r", encoding="utf-8") as handle:
            entries = json.load(handle)
        rules = [
            ScriptRule(
                kind=e["kind"],
                response=e["response"],
                pattern=e.get("pattern"),
                times=e.get("times"),
            )
            for e in entries
        ]
        return cls(rules, **kwargs)

    def chat_structured(self, request: ToolCallRequest) -> dict[str, Any]:
        kind = TOOL_KINDS.get(request.tool_name)
        if kind is None:
            raise ScriptExhausted(f"no script kind for tool {request.tool_name!r}")
        text = request.last_text()
        with self._lock:
            self.calls.append(kind)
            for index, rule in enumerate(self._rules):
                if rule.kind != kind:
                    continue
                if rule.pattern is not None and not re.search(rule.pattern, text):
                    continue
                remaining = self._remaining[index]
                if remaining is not None:
                    if remaining == 0:
                        continue
                    self._remaining[index] = remaining - 1
                response = copy.deepcopy(rule.response)
                return validate_arguments(response, request.validation_schema())
        raise ScriptExhausted(f"no scripted response for kind {kind!r}")

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return self.embedder.embed(texts)
