"""Topic-coverage scoring and the decision to end the interview.

The score is the fraction of topic labels present in the graph that have at
least one fully closed question. A hard cap on exchanges guarantees the
interview halts even if the decision backend expands forever.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping

from .graph import DialogueGraph, NodeState, TopicLabel

PROFILE_THRESHOLDS = {
    "thorough": 0.99,
    "routine": 0.80,
}

DEFAULT_MAX_EXCHANGES = 50


class TerminationReason(Enum):
    SCORE_MET = "score_met"
    EXCHANGE_LIMIT = "exchange_limit"
    NOT_YET = "not_yet"
    # Engine-level outcome: no open question left anywhere, so there is
    # nothing more to ask even though neither threshold fired.
    FRONTIER_EXHAUSTED = "frontier_exhausted"

    @property
    def wire(self) -> str:
        return self.value


@dataclass(frozen=True)
class TerminationConfig:
    threshold: float = PROFILE_THRESHOLDS["thorough"]
    max_exchanges: int = DEFAULT_MAX_EXCHANGES

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.max_exchanges < 1:
            raise ValueError(f"max_exchanges must be positive, got {self.max_exchanges}")

    @classmethod
    def from_profile(cls, profile: str, max_exchanges: int = DEFAULT_MAX_EXCHANGES) -> "TerminationConfig":
        if profile not in PROFILE_THRESHOLDS:
            raise ValueError(f"unknown profile {profile!r}; expected one of {sorted(PROFILE_THRESHOLDS)}")
        return cls(threshold=PROFILE_THRESHOLDS[profile], max_exchanges=max_exchanges)

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> "TerminationConfig":
        """Build from config-file keys: profile, threshold, max_exchanges.

        An explicit threshold wins over the profile's."""
        section = mapping.get("termination", mapping)
        profile = section.get("profile")
        threshold = section.get("threshold")
        if threshold is None:
            threshold = PROFILE_THRESHOLDS[profile] if profile else PROFILE_THRESHOLDS["thorough"]
        elif profile is not None and profile not in PROFILE_THRESHOLDS:
            raise ValueError(f"unknown profile {profile!r}")
        max_exchanges = section.get("max_exchanges", DEFAULT_MAX_EXCHANGES)
        return cls(threshold=float(threshold), max_exchanges=int(max_exchanges))

    def to_wire(self) -> dict[str, Any]:
        return {"threshold": self.threshold, "max_exchanges": self.max_exchanges}


@dataclass(frozen=True)
class CoverageReport:
    covered_labels: frozenset[TopicLabel]
    total_labels: int
    score: float
    exchanges_used: int


@dataclass(frozen=True)
class TerminationVerdict:
    terminate: bool
    reason: TerminationReason


def termination_score(graph: DialogueGraph, exchanges_used: int = 0) -> CoverageReport:
    """Coverage over the labels present in the graph.

    A label counts as covered once at least one of its nodes reached the
    closed state; explore is not enough. An empty graph scores 0.
    """
    present: set[TopicLabel] = set()
    covered: set[TopicLabel] = set()
    for node in graph.nodes():
        present.add(node.label)
        if node.state is NodeState.CLOSED:
            covered.add(node.label)
    total = len(present)
    score = len(covered) / total if total else 0.0
    return CoverageReport(
        covered_labels=frozenset(covered),
        total_labels=total,
        score=score,
        exchanges_used=exchanges_used,
    )


def should_terminate(report: CoverageReport, config: TerminationConfig) -> TerminationVerdict:
    """Score threshold first, then the exchange safeguard."""
    if report.score >= config.threshold:
        return TerminationVerdict(True, TerminationReason.SCORE_MET)
    if report.exchanges_used >= config.max_exchanges:
        return TerminationVerdict(True, TerminationReason.EXCHANGE_LIMIT)
    return TerminationVerdict(False, TerminationReason.NOT_YET)
