"""Shared fixtures: scripted backends and small graph builders."""

from __future__ import annotations

from pathlib import Path

import pytest

from anamnesis.gateway import ScriptedBackend, ScriptRule
from anamnesis.graph import DialogueGraph, Priority, TopicLabel

GOLDEN_DIR = Path(__file__).parent / "golden"

PRUNE = {"type": "prune", "follow_up_questions": []}


def expand(*questions: dict) -> dict:
    return {"type": "expand", "follow_up_questions": list(questions)}


def follow_up(question: str, priority: str = "high", label: str = "chief_complaint") -> dict:
    return {"question": question, "priority": priority, "label": label}


def decision_rule(response: dict, pattern: str | None = None, times: int | None = None) -> ScriptRule:
    return ScriptRule(kind="decision", response=response, pattern=pattern, times=times)


def default_report_rules() -> list[ScriptRule]:
    return [
        ScriptRule(kind="facts", response={"facts": ["Recorded during the interview."]}),
        ScriptRule(
            kind="summary",
            response={"summary": "Stable patient with findings as recorded."},
        ),
    ]


def prune_all_backend() -> ScriptedBackend:
    return ScriptedBackend([decision_rule(PRUNE)] + default_report_rules())


def always_expand_backend() -> ScriptedBackend:
    counter = {"n": 0}

    class _Backend(ScriptedBackend):
        def chat_structured(self, request):  # type: ignore[override]
            if request.tool_name == "node_decision":
                counter["n"] += 1
                return {
                    "type": "expand",
                    "follow_up_questions": [
                        {
                            "question": f"Generated follow-up number {counter['n']}?",
                            "priority": "high",
                            "label": "chief_complaint",
                        }
                    ],
                }
            return super().chat_structured(request)

    return _Backend(default_report_rules())


@pytest.fixture
def prune_backend() -> ScriptedBackend:
    return prune_all_backend()


def star_graph(priorities: list[Priority]) -> DialogueGraph:
    graph = DialogueGraph()
    for index, priority in enumerate(priorities):
        graph.add_node(f"Root question {index}?", priority, TopicLabel.REVIEW_OF_SYSTEMS)
    return graph
