"""Deterministic scripted patients for offline end-to-end interview runs.

A persona answers questions by first-matching-rule lookup, which makes full
interviews reproducible: the same persona, backend script and seed set give
byte-identical event logs apart from timestamps.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .decisions import EngineConfig
from .report import MedicalReport
from .service import InterviewEvent, SessionStore
from .termination import TerminationConfig

BUILTIN_PERSONA_NAMES = ("cooperative", "terse", "chronic_condition")


@dataclass
class PersonaRule:
    pattern: str
    answer: str

    def matches(self, question: str) -> bool:
        return re.search(self.pattern, question, flags=re.IGNORECASE) is not None


@dataclass
class Persona:
    name: str
    rules: list[PersonaRule]
    default_answer: str

    def __post_init__(self) -> None:
        if not self.default_answer:
            raise ValueError("persona needs a non-empty default answer")
        for rule in self.rules:
            re.compile(rule.pattern)

    @classmethod
    def from_mapping(cls, doc: dict[str, Any]) -> "Persona":
        return cls(
            name=doc["name"],
            rules=[PersonaRule(r["pattern"], r["answer"]) for r in doc.get("rules", [])],
            default_answer=doc["default_answer"],
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "Persona":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_mapping(json.load(handle))


def answer_for(persona: Persona, question: str) -> str:
    """First matching rule wins; otherwise the default answer."""
    for rule in persona.rules:
        if rule.matches(question):
            return rule.answer
    return persona.default_answer


def builtin_persona(name: str) -> Persona:
    if name not in BUILTIN_PERSONA_NAMES:
        raise ValueError(f"unknown persona {name!r}; shipped: {BUILTIN_PERSONA_NAMES}")
    text = (
        resources.files("anamnesis.fixtures")
        .joinpath(f"personas/{name}.json")
        .read_text(encoding="utf-8")
    )
    return Persona.from_mapping(json.loads(text))


def builtin_script_path(name: str) -> Path:
    """Filesystem path of a shipped backend script (e.g. 'prune_all')."""
    path = resources.files("anamnesis.fixtures").joinpath(f"scripts/{name}.json")
    return Path(str(path))


@dataclass
class SimulationResult:
    session_id: str
    turns: int
    score: float
    reason: Optional[str]
    events: list[InterviewEvent]
    report: MedicalReport


def run_interview(
    persona: Persona,
    backend: Any,
    *,
    termination: Optional[TerminationConfig] = None,
    engine: Optional[EngineConfig] = None,
    seed_source: str = "builtin",
    log_dir: Optional[str | Path] = None,
    session_id: Optional[str] = None,
    language: str = "en",
    gender: Optional[str] = None,
) -> SimulationResult:
    """Drive one full interview: create, answer until termination, report."""
    store = SessionStore(
        backend=backend,
        seed_source=seed_source,
        termination=termination,
        engine=engine,
        log_dir=log_dir,
    )
    sid = session_id or f"sim-{persona.name}"
    created = store.create_session(
        language=language, gender=gender, session_id=sid
    )
    question = created["first_question"]["question"]
    token = created["turn_token"]
    turns = 0
    score = 0.0
    reason: Optional[str] = None
    # Hard stop well past the exchange safeguard; reaching it means the
    # termination logic is broken, not the persona.
    max_loops = store.session(sid).termination.max_exchanges + len(store.session(sid).graph) + 16
    for _ in range(max_loops):
        response = store.submit_answer(sid, answer_for(persona, question), token)
        turns += 1
        score = response["score"]
        if response["terminated"]:
            reason = response["reason"]
            break
        question = response["next_question"]["question"]
        token = response["turn_token"]
    else:
        raise RuntimeError("interview did not terminate within the safety limit")
    report = store.get_report(sid)
    return SimulationResult(
        session_id=sid,
        turns=turns,
        score=score,
        reason=reason,
        events=store.events_for(sid),
        report=report,
    )
