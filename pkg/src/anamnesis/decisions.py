"""Per-node decision making: evaluate an answer, prune or expand, advance.

Each answered question goes to the backend with the accumulated dialogue and
comes back as a structured prune/expand verdict. Expansion adds follow-up
questions as open children, skipping anything already asked; pruning closes
the node. One engine step covers exactly one patient answer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Optional, Protocol, Sequence

import numpy as np

from .errors import EmptyAnswer, InvalidState, NoPendingQuestion, SchemaViolation
from .graph import (
    DialogueGraph,
    NodeState,
    Priority,
    QuestionNode,
    TopicLabel,
    normalize_text,
)
from .prompts import render_decision_prompt
from .termination import (
    TerminationConfig,
    TerminationReason,
    should_terminate,
    termination_score,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_FOLLOW_UPS = 4
DEFAULT_DEDUP_THRESHOLD = 0.92

DECISION_TOOL = {
    "name": "node_decision",
    "description": (
        "Decide whether the current question is fully answered (prune) or "
        "needs follow-up questions (expand)."
    ),
    "parameters": {
        "type": "object",
        "properties": {
            "type": {"type": "string", "enum": ["prune", "expand"]},
            "follow_up_questions": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "question": {"type": "string"},
                        "priority": {
                            "type": "string",
                            "enum": [p.wire for p in Priority],
                        },
                        "label": {
                            "type": "string",
                            "enum": [l.wire for l in TopicLabel],
                        },
                    },
                    "required": ["question"],
                },
            },
        },
        "required": ["type"],
    },
}


class LlmBackend(Protocol):
    def chat_structured(self, request: Any) -> dict[str, Any]: ...

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class Turn:
    node_id: str
    question: str
    answer: str
    at: str

    def to_wire(self) -> dict[str, str]:
        return {
            "node_id": self.node_id,
            "question": self.question,
            "answer": self.answer,
            "at": self.at,
        }


@dataclass
class ConversationHistory:
    """Append-only record of question/answer turns, one per answered node."""

    turns: list[Turn] = field(default_factory=list)

    def append(self, node_id: str, question: str, answer: str, at: Optional[str] = None) -> Turn:
        turn = Turn(node_id=node_id, question=question, answer=answer, at=at or utc_now())
        self.turns.append(turn)
        return turn

    def as_messages(self) -> list[dict[str, str]]:
        """The dialogue as chat messages: the interviewer asks, the patient
        answers."""
        messages: list[dict[str, str]] = []
        for turn in self.turns:
            messages.append({"role": "assistant", "content": turn.question})
            messages.append({"role": "user", "content": turn.answer})
        return messages

    def __len__(self) -> int:
        return len(self.turns)


class DecisionType(Enum):
    PRUNE = "prune"
    EXPAND = "expand"

    @property
    def wire(self) -> str:
        return self.value


@dataclass(frozen=True)
class FollowUpQuestion:
    question: str
    priority: Priority
    label: TopicLabel

    def to_wire(self) -> dict[str, str]:
        return {
            "question": self.question,
            "priority": self.priority.wire,
            "label": self.label.wire,
        }


@dataclass(frozen=True)
class Decision:
    """Structured prune/expand verdict. Follow-ups must be empty exactly
    when the verdict is prune."""

    type: DecisionType
    follow_up_questions: tuple[FollowUpQuestion, ...] = ()

    def __post_init__(self) -> None:
        if self.type is DecisionType.PRUNE and self.follow_up_questions:
            raise ValueError("prune decision cannot carry follow-up questions")
        if self.type is DecisionType.EXPAND and not self.follow_up_questions:
            raise ValueError("expand decision requires at least one follow-up question")

    def to_wire(self) -> dict[str, Any]:
        return {
            "type": self.type.wire,
            "follow_up_questions": [f.to_wire() for f in self.follow_up_questions],
        }

    @classmethod
    def from_wire(cls, doc: dict[str, Any]) -> "Decision":
        return cls(
            type=DecisionType(doc["type"]),
            follow_up_questions=tuple(
                FollowUpQuestion(
                    question=f["question"],
                    priority=Priority.from_wire(f["priority"]),
                    label=TopicLabel.from_wire(f["label"]),
                )
                for f in doc.get("follow_up_questions", [])
            ),
        )


def build_evaluation_prompt(node: QuestionNode) -> str:
    """The decision instruction with this node's question filled in."""
    return render_decision_prompt(node.question)


def _parse_decision(
    arguments: dict[str, Any], node: QuestionNode, max_follow_ups: int
) -> Decision:
    decision_type = arguments.get("type")
    if decision_type not in ("prune", "expand"):
        raise SchemaViolation(f"decision type must be prune or expand, got {decision_type!r}")
    raw_follow_ups = arguments.get("follow_up_questions") or []
    if decision_type == "prune" and raw_follow_ups:
        raise SchemaViolation("prune decision must not carry follow-up questions")
    if decision_type == "expand" and not raw_follow_ups:
        raise SchemaViolation("expand decision must carry at least one follow-up question")
    if len(raw_follow_ups) > max_follow_ups:
        logger.warning(
            "decision for %s carries %d follow-ups; keeping the first %d",
            node.id, len(raw_follow_ups), max_follow_ups,
        )
        raw_follow_ups = raw_follow_ups[:max_follow_ups]
    follow_ups = []
    for raw in raw_follow_ups:
        question = raw.get("question", "")
        if not normalize_text(question):
            raise SchemaViolation(f"follow-up question is empty: {question!r}")
        try:
            priority = (
                Priority.from_wire(raw["priority"]) if raw.get("priority") else node.priority
            )
            label = TopicLabel.from_wire(raw["label"]) if raw.get("label") else node.label
        except ValueError as exc:
            raise SchemaViolation(str(exc)) from None
        follow_ups.append(FollowUpQuestion(question=question, priority=priority, label=label))
    return Decision(type=DecisionType(decision_type), follow_up_questions=tuple(follow_ups))


def evaluate(
    node: QuestionNode,
    answer: str,
    history: ConversationHistory,
    backend: LlmBackend,
    *,
    max_follow_ups: int = DEFAULT_MAX_FOLLOW_UPS,
    temperature: float = 0.0,
) -> Decision:
    """Ask the backend to prune or expand the answered node.

    The call is schema-constrained; a malformed reply gets one retry with a
    corrective note before the violation propagates.
    """
    from .gateway import ToolCallRequest

    if node.answer is None and not answer:
        raise ValueError(f"node {node.id} has no answer to evaluate")
    messages = history.as_messages()
    messages.append({"role": "user", "content": build_evaluation_prompt(node)})
    request = ToolCallRequest(
        messages=messages,
        tool_schema=DECISION_TOOL,
        temperature=temperature,
    )
    try:
        return _parse_decision(backend.chat_structured(request), node, max_follow_ups)
    except SchemaViolation as exc:
        logger.warning("decision for %s violated the schema (%s); retrying once", node.id, exc)
        corrective = request.with_corrective_note(
            "The previous reply did not satisfy the node_decision format "
            f"({exc}). Reply again via the node_decision function: type must be "
            "'prune' (with no follow_up_questions) or 'expand' (with at least "
            "one follow-up, each carrying a non-empty question)."
        )
        return _parse_decision(backend.chat_structured(corrective), node, max_follow_ups)


def is_duplicate(
    graph: DialogueGraph,
    candidate: FollowUpQuestion,
    embedder: Optional[Any] = None,
    threshold: float = DEFAULT_DEDUP_THRESHOLD,
) -> bool:
    """True when the candidate matches an existing question.

    Exact match on normalized text always applies; with an embedder
    configured, cosine similarity at or above the threshold also counts.
    """
    normalized = normalize_text(candidate.question)
    existing = list(graph.nodes())
    if any(node.normalized_text == normalized for node in existing):
        return True
    if embedder is None or not existing:
        return False
    vectors = embedder.embed([candidate.question] + [n.question for n in existing])
    candidate_vec, node_vecs = vectors[0], vectors[1:]
    return any(float(np.dot(candidate_vec, v)) >= threshold for v in node_vecs)


def apply_decision(
    graph: DialogueGraph,
    node_id: str,
    decision: Decision,
    *,
    embedder: Optional[Any] = None,
    dedup_threshold: float = DEFAULT_DEDUP_THRESHOLD,
) -> list[str]:
    """Mutate the graph per the verdict; returns ids of added follow-ups.

    Prune closes the node. Expand marks it explore and attaches each
    non-duplicate follow-up as a fresh open child; duplicates are skipped
    silently so the same question is never asked twice.
    """
    node = graph.node(node_id)
    if node.state is not NodeState.OPEN:
        raise InvalidState(f"decision target {node_id} is {node.state.wire}, not open")
    if node.answer is None:
        raise InvalidState(f"decision target {node_id} has no recorded answer")
    if decision.type is DecisionType.PRUNE:
        graph.transition(node_id, NodeState.CLOSED)
        return []
    graph.transition(node_id, NodeState.EXPLORE)
    added: list[str] = []
    for follow_up in decision.follow_up_questions:
        if is_duplicate(graph, follow_up, embedder=embedder, threshold=dedup_threshold):
            logger.debug("skipping duplicate follow-up: %r", follow_up.question)
            continue
        child_id = graph.add_node(follow_up.question, follow_up.priority, follow_up.label)
        graph.add_edge(node_id, child_id)
        added.append(child_id)
    return added


@dataclass
class EngineConfig:
    max_follow_ups: int = DEFAULT_MAX_FOLLOW_UPS
    dedup_threshold: float = DEFAULT_DEDUP_THRESHOLD
    semantic_dedup: bool = False

    def to_wire(self) -> dict[str, Any]:
        return {
            "max_follow_ups": self.max_follow_ups,
            "dedup_threshold": self.dedup_threshold,
            "semantic_dedup": self.semantic_dedup,
        }

    @classmethod
    def from_wire(cls, doc: dict[str, Any]) -> "EngineConfig":
        return cls(
            max_follow_ups=doc.get("max_follow_ups", DEFAULT_MAX_FOLLOW_UPS),
            dedup_threshold=doc.get("dedup_threshold", DEFAULT_DEDUP_THRESHOLD),
            semantic_dedup=doc.get("semantic_dedup", False),
        )


@dataclass
class InterviewState:
    """Everything one running interview needs between turns."""

    graph: DialogueGraph
    history: ConversationHistory = field(default_factory=ConversationHistory)
    pending_node: Optional[str] = None
    exchanges_used: int = 0
    terminated: bool = False
    termination_reason: Optional[TerminationReason] = None


@dataclass
class StepOutcome:
    asked: Optional[QuestionNode]
    decision: Decision
    added: list[str]
    terminated: bool
    reason: Optional[TerminationReason]
    score: float


def advance_after_decision(
    state: InterviewState,
    node_id: str,
    termination_config: TerminationConfig,
) -> tuple[Optional[str], float]:
    """Shared tail of a step: score the graph, decide termination, and move
    the cursor. Returns (next pending node id or None, score)."""
    report = termination_score(state.graph, exchanges_used=state.exchanges_used)
    verdict = should_terminate(report, termination_config)
    if verdict.terminate:
        state.terminated = True
        state.termination_reason = verdict.reason
        state.pending_node = None
        return None, report.score
    next_id = state.graph.next_open_node(node_id)
    if next_id is None:
        state.terminated = True
        state.termination_reason = TerminationReason.FRONTIER_EXHAUSTED
        state.pending_node = None
        return None, report.score
    state.pending_node = next_id
    return next_id, report.score


def step(
    state: InterviewState,
    answer: str,
    backend: LlmBackend,
    termination_config: TerminationConfig,
    engine_config: Optional[EngineConfig] = None,
    *,
    now: Optional[str] = None,
) -> StepOutcome:
    """Consume one patient answer: record it, evaluate, mutate the graph,
    check termination, and pick the next question.

    The backend call happens before any state is committed, so a backend or
    schema failure leaves the interview exactly where it was and the same
    answer can simply be resubmitted.
    """
    config = engine_config or EngineConfig()
    if state.terminated or state.pending_node is None:
        raise NoPendingQuestion("no open question is awaiting an answer")
    node_id = state.pending_node
    node = state.graph.node(node_id)
    if not answer or not answer.strip():
        raise EmptyAnswer(node_id)
    turn = state.history.append(node_id, node.question, answer, at=now)
    try:
        decision = evaluate(
            node, answer, state.history, backend, max_follow_ups=config.max_follow_ups
        )
    except Exception:
        state.history.turns.remove(turn)
        raise
    state.graph.set_answer(node_id, answer)
    state.exchanges_used += 1
    embedder = backend if config.semantic_dedup else None
    added = apply_decision(
        state.graph,
        node_id,
        decision,
        embedder=embedder,
        dedup_threshold=config.dedup_threshold,
    )
    next_id, score = advance_after_decision(state, node_id, termination_config)
    asked = state.graph.node(next_id) if next_id is not None else None
    return StepOutcome(
        asked=asked,
        decision=decision,
        added=added,
        terminated=state.terminated,
        reason=state.termination_reason if state.terminated else None,
        score=score,
    )
