"""Structured medical report: per-category bullet facts plus a global summary.

Answered nodes (closed or still exploring) are grouped by topic label,
turned into short bullet facts via the backend, ordered by average priority,
and capped with a two-sentence symptomatic summary.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Optional, Sequence

from .errors import SchemaViolation
from .graph import DialogueGraph, NodeState, QuestionNode, TopicLabel
from .prompts import render_summary_prompt

logger = logging.getLogger(__name__)

SUMMARY_MAX_CHARS = 400
PENDING_MARKER = " (follow-up pending)"
DEFAULT_FACTS_PARALLELISM = 4

FACTS_TOOL = {
    "name": "category_facts",
    "description": (
        "Summarize question/answer pairs from one medical-note category "
        "into short bullet-point facts."
    ),
    "parameters": {
        "type": "object",
        "properties": {
            "facts": {
                "type": "array",
                "minItems": 1,
                "items": {"type": "string"},
            },
        },
        "required": ["facts"],
    },
}

SUMMARY_TOOL = {
    "name": "symptomatic_summary",
    "description": "Produce the global symptomatic summary of the patient's health.",
    "parameters": {
        "type": "object",
        "properties": {
            "summary": {"type": "string"},
        },
        "required": ["summary"],
    },
}


@dataclass
class CategorySection:
    label: TopicLabel
    facts: list[str]
    avg_priority: float
    node_count: int

    def to_wire(self) -> dict[str, Any]:
        return {
            "label": self.label.wire,
            "avg_priority": self.avg_priority,
            "node_count": self.node_count,
            "facts": list(self.facts),
        }

    @classmethod
    def from_wire(cls, doc: dict[str, Any]) -> "CategorySection":
        return cls(
            label=TopicLabel.from_wire(doc["label"]),
            facts=list(doc["facts"]),
            avg_priority=float(doc["avg_priority"]),
            node_count=int(doc["node_count"]),
        )


@dataclass
class MedicalReport:
    sections: list[CategorySection]
    summary: str
    language: str
    session_id: str
    generated_at: str
    patient_gender: Optional[str] = None

    def to_wire(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "session_id": self.session_id,
            "generated_at": self.generated_at,
            "language": self.language,
            "summary": self.summary,
            "sections": [s.to_wire() for s in self.sections],
        }
        if self.patient_gender is not None:
            doc["patient_gender"] = self.patient_gender
        return doc

    @classmethod
    def from_wire(cls, doc: dict[str, Any]) -> "MedicalReport":
        return cls(
            sections=[CategorySection.from_wire(s) for s in doc["sections"]],
            summary=doc["summary"],
            language=doc["language"],
            session_id=doc["session_id"],
            generated_at=doc["generated_at"],
            patient_gender=doc.get("patient_gender"),
        )

    def render_text(self) -> str:
        """Plain-text view: summary first, then bullets per category."""
        lines = ["MEDICAL REPORT", f"Session: {self.session_id}"]
        if self.patient_gender:
            lines.append(f"Patient gender: {self.patient_gender}")
        lines.extend(["", "Summary:", self.summary, ""])
        for section in self.sections:
            title = section.label.wire.replace("_", " ").title()
            lines.append(f"{title}:")
            for fact in section.facts:
                lines.append(f"  - {fact}")
            lines.append("")
        return "\n".join(lines).rstrip() + "\n"


def _answered_nodes(graph: DialogueGraph) -> dict[TopicLabel, list[QuestionNode]]:
    """Closed and explore nodes grouped by label, insertion order within."""
    grouped: dict[TopicLabel, list[QuestionNode]] = {}
    for node in sorted(graph.nodes(), key=lambda n: n.insertion_index):
        if node.state in (NodeState.CLOSED, NodeState.EXPLORE):
            grouped.setdefault(node.label, []).append(node)
    return grouped


def collect_answered(graph: DialogueGraph) -> dict[TopicLabel, list[tuple[str, str]]]:
    """Question/answer pairs of every closed or explore node, by label."""
    return {
        label: [(n.question, n.answer or "") for n in nodes]
        for label, nodes in _answered_nodes(graph).items()
    }


def order_categories(sections: Sequence[CategorySection]) -> list[CategorySection]:
    """Importance order: average priority desc, node count desc, label asc."""
    return sorted(
        sections,
        key=lambda s: (-s.avg_priority, -s.node_count, s.label.wire),
    )


def _qa_block(qa_pairs: Sequence[tuple[str, str]]) -> str:
    return "\n".join(f"Q: {q}\nA: {a}" for q, a in qa_pairs)


def generate_facts(
    label: TopicLabel,
    qa_pairs: Sequence[tuple[str, str]],
    backend: Any,
    language: str = "en",
) -> list[str]:
    """Bullet facts for one category; schema-constrained with one retry."""
    from .gateway import ToolCallRequest

    if not qa_pairs:
        raise ValueError(f"no question/answer pairs for category {label.wire}")
    prompt = (
        "Summarize the following patient interview exchanges from the "
        f"'{label.wire}' category into short bullet-point facts. "
        f"Write the facts in '{language}'.\n\n{_qa_block(qa_pairs)}"
    )
    request = ToolCallRequest(
        messages=[{"role": "user", "content": prompt}],
        tool_schema=FACTS_TOOL,
    )

    def call(req: Any) -> list[str]:
        facts = [f.strip() for f in backend.chat_structured(req)["facts"]]
        facts = [f for f in facts if f]
        if not facts:
            raise SchemaViolation(f"backend produced no facts for {label.wire}")
        return facts

    try:
        return call(request)
    except SchemaViolation as exc:
        logger.warning("fact generation for %s violated the schema (%s); retrying once", label.wire, exc)
        corrective = request.with_corrective_note(
            f"The previous reply was not a valid category_facts call ({exc}). "
            "Reply again with a non-empty array of non-empty fact strings."
        )
        return call(corrective)


def build_nodes_repr(
    ordered_pairs: Sequence[tuple[TopicLabel, Sequence[tuple[str, str]]]],
    gender: Optional[str] = None,
) -> str:
    """Numbered interaction lines, category order, optional gender prefix."""
    lines: list[str] = []
    if gender:
        lines.append(f"Patient gender: {gender}.")
    number = 1
    for _, qa_pairs in ordered_pairs:
        for question, answer in qa_pairs:
            lines.append(f"{number}. Q: {question} / A: {answer}")
            number += 1
    return "\n".join(lines)


def generate_summary(
    ordered_pairs: Sequence[tuple[TopicLabel, Sequence[tuple[str, str]]]],
    backend: Any,
    language: str = "en",
    gender: Optional[str] = None,
) -> str:
    """Global symptomatic summary over all answered pairs, stored as-is
    apart from the hard 400-character cap."""
    from .gateway import ToolCallRequest

    if not any(qa for _, qa in ordered_pairs):
        raise ValueError("summary requires at least one answered node")
    prompt = render_summary_prompt(language, build_nodes_repr(ordered_pairs, gender))
    request = ToolCallRequest(
        messages=[{"role": "user", "content": prompt}],
        tool_schema=SUMMARY_TOOL,
    )
    summary = backend.chat_structured(request)["summary"]
    if len(summary) > SUMMARY_MAX_CHARS:
        logger.warning(
            "summary exceeds %d characters (%d); truncating",
            SUMMARY_MAX_CHARS, len(summary),
        )
        summary = summary[:SUMMARY_MAX_CHARS]
    return summary


def _section_facts(
    section_nodes: list[QuestionNode],
    label: TopicLabel,
    backend: Any,
    language: str,
) -> list[str]:
    """Facts for one section. Nodes still awaiting follow-ups are summarized
    separately so their bullets can carry the pending marker."""
    closed_pairs = [
        (n.question, n.answer or "") for n in section_nodes if n.state is NodeState.CLOSED
    ]
    explore_pairs = [
        (n.question, n.answer or "") for n in section_nodes if n.state is NodeState.EXPLORE
    ]
    facts: list[str] = []
    if closed_pairs:
        facts.extend(generate_facts(label, closed_pairs, backend, language))
    if explore_pairs:
        facts.extend(
            fact + PENDING_MARKER
            for fact in generate_facts(label, explore_pairs, backend, language)
        )
    return facts


def assemble_report(
    graph: DialogueGraph,
    backend: Any,
    *,
    session_id: str,
    language: str = "en",
    gender: Optional[str] = None,
    max_workers: int = DEFAULT_FACTS_PARALLELISM,
    generated_at: Optional[str] = None,
) -> MedicalReport:
    """Collect answered nodes, generate facts per category, order sections,
    and produce the summary. Deterministic given a deterministic backend."""
    grouped = _answered_nodes(graph)
    if not grouped:
        raise ValueError("cannot assemble a report with no answered nodes")
    skeletons = [
        CategorySection(
            label=label,
            facts=[],
            avg_priority=sum(int(n.priority) for n in nodes) / len(nodes),
            node_count=len(nodes),
        )
        for label, nodes in grouped.items()
    ]
    ordered = order_categories(skeletons)

    def fill(section: CategorySection) -> CategorySection:
        section.facts = _section_facts(grouped[section.label], section.label, backend, language)
        return section

    if max_workers > 1 and len(ordered) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            list(pool.map(fill, ordered))
    else:
        for section in ordered:
            fill(section)

    ordered_pairs = [
        (
            section.label,
            [(n.question, n.answer or "") for n in grouped[section.label]],
        )
        for section in ordered
    ]
    summary = generate_summary(ordered_pairs, backend, language, gender)
    return MedicalReport(
        sections=ordered,
        summary=summary,
        language=language,
        session_id=session_id,
        generated_at=generated_at or datetime.now(timezone.utc).isoformat(),
        patient_gender=gender,
    )
