"""Interview sessions behind an HTTP API, persisted as append-only event logs.

Every mutation of a session is recorded as an ordered event; replaying the
log rebuilds the session exactly, which doubles as crash recovery and as an
audit trail of the medical dialogue. One step's events are flushed as a
single batch so a cut log never exposes a half-applied step.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Sequence

from .corpus import SeedQuestion, builtin_seed_set, load_corpus_seeds
from .decisions import (
    Decision,
    EngineConfig,
    InterviewState,
    advance_after_decision,
    step,
    utc_now,
)
from .errors import (
    AnamnesisError,
    NoPendingQuestion,
    NotActive,
    NotTerminated,
    SessionNotFound,
    StaleTurnToken,
)
from .graph import DialogueGraph, NodeState, Priority, QuestionNode, TopicLabel
from .report import MedicalReport, assemble_report
from .termination import TerminationConfig, termination_score

logger = logging.getLogger(__name__)


class SessionStatus(Enum):
    ACTIVE = "active"
    TERMINATED = "terminated"
    REPORTED = "reported"

    @property
    def wire(self) -> str:
        return self.value


class EventKind(Enum):
    SESSION_CREATED = "session_created"
    QUESTION_ASKED = "question_asked"
    ANSWER_RECEIVED = "answer_received"
    DECISION_APPLIED = "decision_applied"
    TERMINATED = "terminated"
    REPORT_GENERATED = "report_generated"

    @property
    def wire(self) -> str:
        return self.value


@dataclass
class InterviewEvent:
    seq: int
    kind: EventKind
    payload: dict[str, Any]
    at: str

    def to_json_line(self) -> str:
        return json.dumps(
            {"seq": self.seq, "kind": self.kind.wire, "at": self.at, "payload": self.payload},
            separators=(",", ":"),
            sort_keys=True,
        )

    @classmethod
    def from_json_line(cls, line: str) -> "InterviewEvent":
        doc = json.loads(line)
        return cls(
            seq=doc["seq"],
            kind=EventKind(doc["kind"]),
            payload=doc["payload"],
            at=doc["at"],
        )


@dataclass
class Session:
    """One interview: the graph plus everything around it."""

    id: str
    interview: InterviewState
    termination: TerminationConfig
    engine: EngineConfig
    language: str = "en"
    patient_gender: Optional[str] = None
    status: SessionStatus = SessionStatus.ACTIVE
    turn_token: Optional[str] = None
    report: Optional[MedicalReport] = None
    events: list[InterviewEvent] = field(default_factory=list)
    lock: threading.RLock = field(default_factory=threading.RLock, repr=False, compare=False)

    @property
    def graph(self) -> DialogueGraph:
        return self.interview.graph

    def next_token(self) -> str:
        return f"t{len([e for e in self.events if e.kind is EventKind.QUESTION_ASKED])}"

    def comparable(self) -> dict[str, Any]:
        """Field-wise view for equality checks between live and replayed
        sessions; excludes the lock and the raw event list."""
        return {
            "id": self.id,
            "language": self.language,
            "patient_gender": self.patient_gender,
            "status": self.status.wire,
            "turn_token": self.turn_token,
            "pending_node": self.interview.pending_node,
            "exchanges_used": self.interview.exchanges_used,
            "terminated": self.interview.terminated,
            "termination_reason": (
                self.interview.termination_reason.wire
                if self.interview.termination_reason
                else None
            ),
            "termination_config": self.termination.to_wire(),
            "engine_config": self.engine.to_wire(),
            "graph": self.graph.snapshot(),
            "history": [t.to_wire() for t in self.interview.history.turns],
            "report": self.report.to_wire() if self.report else None,
        }


def seed_graph(seeds: Sequence[SeedQuestion]) -> DialogueGraph:
    """Standalone root nodes, one per seed question, in the given order."""
    graph = DialogueGraph()
    for seed in seeds:
        graph.add_node(seed.question, seed.priority, seed.label)
    return graph


def _question_wire(node: QuestionNode) -> dict[str, Any]:
    return {
        "node_id": node.id,
        "question": node.question,
        "priority": node.priority.wire,
        "label": node.label.wire,
    }


class SessionStore:
    """Holds live sessions, serializes their mutations, and writes the logs.

    Distinct sessions only share the backend; each one is guarded by its own
    lock so a slow backend call never blocks the others.
    """

    def __init__(
        self,
        backend: Any,
        seed_source: str = "builtin",
        termination: Optional[TerminationConfig] = None,
        engine: Optional[EngineConfig] = None,
        log_dir: Optional[str | Path] = None,
    ) -> None:
        self.backend = backend
        self.seed_source = seed_source
        self.termination = termination or TerminationConfig()
        self.engine = engine or EngineConfig()
        self.log_dir = Path(log_dir) if log_dir else None
        self._sessions: dict[str, Session] = {}
        self._map_lock = threading.Lock()
        self._counter = 0
        if self.log_dir is not None:
            self.log_dir.mkdir(parents=True, exist_ok=True)
            self.recover()

    # -- persistence ---------------------------------------------------------

    def _log_path(self, session_id: str) -> Optional[Path]:
        if self.log_dir is None:
            return None
        return self.log_dir / f"{session_id}.jsonl"

    def _record(
        self,
        session: Session,
        batch: list[tuple[EventKind, dict[str, Any]]],
        at: str,
    ) -> None:
        """Append a batch of events and flush them as one write."""
        events = []
        seq = len(session.events)
        for kind, payload in batch:
            events.append(InterviewEvent(seq=seq, kind=kind, payload=payload, at=at))
            seq += 1
        session.events.extend(events)
        path = self._log_path(session.id)
        if path is not None:
            blob = "".join(e.to_json_line() + "\n" for e in events)
            with open(path, "a", encoding="utf-8") as handle:
                handle.write(blob)
                handle.flush()

    def recover(self) -> None:
        """Rebuild sessions from every log file in the log directory."""
        assert self.log_dir is not None
        for path in sorted(self.log_dir.glob("*.jsonl")):
            try:
                events = load_events(path)
                session = replay_events(events)
            except (OSError, json.JSONDecodeError, KeyError, ValueError, AnamnesisError) as exc:
                logger.error("skipping unreadable session log %s: %s", path, exc)
                continue
            self._sessions[session.id] = session
        if self._sessions:
            logger.info("recovered %d session(s) from %s", len(self._sessions), self.log_dir)

    # -- session lifecycle ---------------------------------------------------

    def _load_seeds(self) -> list[SeedQuestion]:
        if self.seed_source == "builtin":
            return builtin_seed_set()
        return load_corpus_seeds(self.seed_source)

    def _new_session_id(self) -> str:
        with self._map_lock:
            self._counter += 1
            return f"s{self._counter:06d}"

    def session(self, session_id: str) -> Session:
        with self._map_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionNotFound(session_id)
        return session

    def create_session(
        self,
        language: str = "en",
        gender: Optional[str] = None,
        session_id: Optional[str] = None,
        termination: Optional[TerminationConfig] = None,
    ) -> dict[str, Any]:
        sid = session_id or self._new_session_id()
        with self._map_lock:
            if sid in self._sessions:
                raise ValueError(f"session id already in use: {sid}")
        seeds = self._load_seeds()
        graph = seed_graph(seeds)
        session = Session(
            id=sid,
            interview=InterviewState(graph=graph),
            termination=termination or self.termination,
            engine=self.engine,
            language=language,
            patient_gender=gender,
        )
        first_id = graph.next_open_node(None)
        if first_id is None:
            raise NoPendingQuestion("seed corpus produced no askable question")
        session.interview.pending_node = first_id
        session.turn_token = session.next_token()
        first = graph.node(first_id)
        at = utc_now()
        self._record(
            session,
            [
                (
                    EventKind.SESSION_CREATED,
                    {
                        "session_id": sid,
                        "language": language,
                        "patient_gender": gender,
                        "termination": session.termination.to_wire(),
                        "engine": session.engine.to_wire(),
                        "seeds": [s.to_wire() for s in seeds],
                    },
                ),
                (
                    EventKind.QUESTION_ASKED,
                    {
                        "node_id": first_id,
                        "question": first.question,
                        "turn_token": session.turn_token,
                    },
                ),
            ],
            at,
        )
        with self._map_lock:
            self._sessions[sid] = session
        return {
            "session_id": sid,
            "first_question": _question_wire(first),
            "turn_token": session.turn_token,
        }

    def submit_answer(self, session_id: str, answer: str, turn_token: str) -> dict[str, Any]:
        session = self.session(session_id)
        with session.lock:
            if session.status is not SessionStatus.ACTIVE:
                raise NotActive(f"session {session_id} is {session.status.wire}")
            if turn_token != session.turn_token:
                raise StaleTurnToken(
                    f"token {turn_token!r} does not match the pending question"
                )
            at = utc_now()
            node_id = session.interview.pending_node
            outcome = step(
                session.interview,
                answer,
                self.backend,
                session.termination,
                session.engine,
                now=at,
            )
            added_wire = [
                {
                    "id": nid,
                    "question": session.graph.node(nid).question,
                    "priority": session.graph.node(nid).priority.wire,
                    "label": session.graph.node(nid).label.wire,
                }
                for nid in outcome.added
            ]
            batch: list[tuple[EventKind, dict[str, Any]]] = [
                (EventKind.ANSWER_RECEIVED, {"node_id": node_id, "answer": answer}),
                (
                    EventKind.DECISION_APPLIED,
                    {
                        "node_id": node_id,
                        "decision": outcome.decision.to_wire(),
                        "added": added_wire,
                        "score": outcome.score,
                    },
                ),
            ]
            if outcome.terminated:
                session.status = SessionStatus.TERMINATED
                session.turn_token = None
                reason = outcome.reason.wire if outcome.reason else None
                batch.append(
                    (
                        EventKind.TERMINATED,
                        {
                            "reason": reason,
                            "score": outcome.score,
                            "exchanges_used": session.interview.exchanges_used,
                        },
                    )
                )
                self._record(session, batch, at)
                return {
                    "next_question": None,
                    "turn_token": None,
                    "terminated": True,
                    "score": outcome.score,
                    "reason": reason,
                }
            session.turn_token = session.next_token()
            assert outcome.asked is not None
            batch.append(
                (
                    EventKind.QUESTION_ASKED,
                    {
                        "node_id": outcome.asked.id,
                        "question": outcome.asked.question,
                        "turn_token": session.turn_token,
                    },
                )
            )
            self._record(session, batch, at)
            return {
                "next_question": _question_wire(outcome.asked),
                "turn_token": session.turn_token,
                "terminated": False,
                "score": outcome.score,
                "reason": None,
            }

    def get_report(self, session_id: str) -> MedicalReport:
        session = self.session(session_id)
        with session.lock:
            if session.status is SessionStatus.REPORTED:
                assert session.report is not None
                return session.report
            if session.status is not SessionStatus.TERMINATED:
                raise NotTerminated(f"session {session_id} is still {session.status.wire}")
            at = utc_now()
            report = assemble_report(
                session.graph,
                self.backend,
                session_id=session.id,
                language=session.language,
                gender=session.patient_gender,
                generated_at=at,
            )
            session.report = report
            session.status = SessionStatus.REPORTED
            self._record(session, [(EventKind.REPORT_GENERATED, {"report": report.to_wire()})], at)
            return report

    def get_snapshot(self, session_id: str) -> dict[str, Any]:
        session = self.session(session_id)
        with session.lock:
            score = termination_score(
                session.graph, exchanges_used=session.interview.exchanges_used
            )
            pending = session.interview.pending_node
            return {
                "session_id": session.id,
                "status": session.status.wire,
                "score": score.score,
                "exchanges_used": session.interview.exchanges_used,
                "termination_reason": (
                    session.interview.termination_reason.wire
                    if session.interview.termination_reason
                    else None
                ),
                "current_question": (
                    _question_wire(session.graph.node(pending)) if pending else None
                ),
                "turn_token": session.turn_token,
                "graph": session.graph.snapshot(),
            }

    def events_for(self, session_id: str) -> list[InterviewEvent]:
        return list(self.session(session_id).events)


def load_events(path: str | Path) -> list[InterviewEvent]:
    """Read a session log, ignoring a trailing half-written line."""
    events: list[InterviewEvent] = []
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    for index, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            events.append(InterviewEvent.from_json_line(line))
        except (json.JSONDecodeError, KeyError, ValueError):
            if index == len(lines) - 1:
                logger.warning("dropping half-written final line of %s", path)
                break
            raise
    return events


def replay_events(events: Sequence[InterviewEvent]) -> Session:
    """Rebuild a session purely from its event log; no backend involved.

    Recorded decisions are re-applied instead of re-evaluated, and the
    traversal cursor is recomputed with the same deterministic rules the
    live engine used, so the result matches the live session field by
    field. A trailing answer without its decision (a cut mid-step) is
    discarded so the session stays resumable.
    """
    if not events or events[0].kind is not EventKind.SESSION_CREATED:
        raise ValueError("event log must start with session_created")
    created = events[0].payload
    seeds = [SeedQuestion.from_wire(doc) for doc in created["seeds"]]
    session = Session(
        id=created["session_id"],
        interview=InterviewState(graph=seed_graph(seeds)),
        termination=TerminationConfig(**created["termination"]),
        engine=EngineConfig.from_wire(created["engine"]),
        language=created.get("language", "en"),
        patient_gender=created.get("patient_gender"),
    )
    session.events = list(events)
    state = session.interview
    graph = state.graph
    pending_answer: Optional[tuple[str, str, str]] = None

    for event in events[1:]:
        payload = event.payload
        if event.kind is EventKind.QUESTION_ASKED:
            node_id = payload["node_id"]
            if state.pending_node is None:
                state.pending_node = node_id
            elif state.pending_node != node_id:
                raise ValueError(
                    f"log asks {node_id} but replay expected {state.pending_node}"
                )
            session.turn_token = payload["turn_token"]
        elif event.kind is EventKind.ANSWER_RECEIVED:
            pending_answer = (payload["node_id"], payload["answer"], event.at)
        elif event.kind is EventKind.DECISION_APPLIED:
            if pending_answer is None or pending_answer[0] != payload["node_id"]:
                raise ValueError("decision_applied without its answer_received")
            node_id, answer, at = pending_answer
            pending_answer = None
            node = graph.node(node_id)
            graph.set_answer(node_id, answer)
            state.history.append(node_id, node.question, answer, at=at)
            state.exchanges_used += 1
            decision = Decision.from_wire(payload["decision"])
            if decision.type.wire == "prune":
                graph.transition(node_id, NodeState.CLOSED)
            else:
                graph.transition(node_id, NodeState.EXPLORE)
                for child in payload["added"]:
                    new_id = graph.add_node(
                        child["question"],
                        Priority.from_wire(child["priority"]),
                        TopicLabel.from_wire(child["label"]),
                    )
                    if new_id != child["id"]:
                        raise ValueError(
                            f"replayed node id {new_id} differs from recorded {child['id']}"
                        )
                    graph.add_edge(node_id, new_id)
            next_id, _ = advance_after_decision(state, node_id, session.termination)
            if next_id is None:
                session.turn_token = None
            else:
                state.pending_node = next_id
        elif event.kind is EventKind.TERMINATED:
            if not state.terminated:
                raise ValueError("terminated event does not match replayed state")
            session.status = SessionStatus.TERMINATED
        elif event.kind is EventKind.REPORT_GENERATED:
            session.report = MedicalReport.from_wire(payload["report"])
            session.status = SessionStatus.REPORTED

    if pending_answer is not None:
        node_id = pending_answer[0]
        logger.info(
            "discarding incomplete step for node %s at the end of the log", node_id
        )
    return session
