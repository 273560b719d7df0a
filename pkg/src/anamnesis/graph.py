"""Dialogue DAG of clinical questions and the traversal that picks the next one.

Nodes carry a priority, a lifecycle state and a topic label. Edges encode
follow-up relationships. Traversal is depth-first so the interview stays on
one topic until it is exhausted, with priority deciding between siblings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Any, Iterator, Optional

from .errors import (
    AlreadyAnswered,
    CycleDetected,
    DuplicateEdge,
    EmptyAnswer,
    EmptyQuestion,
    InvalidState,
    UnknownNode,
)


class Priority(IntEnum):
    """Question urgency. The numeric value doubles as the rank used when
    averaging priorities for report ordering."""

    LOW = 0
    INTERMEDIATE = 1
    HIGH = 2
    URGENT = 3

    @property
    def wire(self) -> str:
        return self.name.lower()

    @classmethod
    def from_wire(cls, value: str) -> "Priority":
        try:
            return cls[value.strip().upper()]
        except (KeyError, AttributeError):
            raise ValueError(f"unknown priority: {value!r}") from None


class NodeState(Enum):
    """Lifecycle of a question node.

    open: not yet asked. explore: asked, follow-ups outstanding.
    closed: fully addressed.
    """

    OPEN = "open"
    EXPLORE = "explore"
    CLOSED = "closed"

    @property
    def wire(self) -> str:
        return self.value

    @classmethod
    def from_wire(cls, value: str) -> "NodeState":
        try:
            return cls(value.strip().lower())
        except (ValueError, AttributeError):
            raise ValueError(f"unknown state: {value!r}") from None


# The only legal state transitions; anything out of CLOSED is forbidden.
LEGAL_TRANSITIONS = {
    (NodeState.OPEN, NodeState.EXPLORE),
    (NodeState.OPEN, NodeState.CLOSED),
    (NodeState.EXPLORE, NodeState.CLOSED),
}


class TopicLabel(Enum):
    """The ten medical-note categories a question can belong to."""

    HISTORY_OF_PRESENT_ILLNESS = "history_of_present_illness"
    REVIEW_OF_SYSTEMS = "review_of_systems"
    PAST_MEDICAL_HISTORY = "past_medical_history"
    MEDICATIONS = "medications"
    CHIEF_COMPLAINT = "chief_complaint"
    PAST_SURGICAL_HISTORY = "past_surgical_history"
    ALLERGY = "allergy"
    GYNECOLOGIC_HISTORY = "gynecologic_history"
    FAMILY_HISTORY = "family_history"
    SOCIAL_HISTORY = "social_history"

    @property
    def wire(self) -> str:
        return self.value

    @classmethod
    def from_wire(cls, value: str) -> "TopicLabel":
        try:
            return cls(value.strip().lower())
        except (ValueError, AttributeError):
            raise ValueError(f"unknown topic label: {value!r}") from None


_PUNCT_RE = re.compile(r"[^\w\s]+", flags=re.UNICODE)


def normalize_text(text: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace.

    This is the dedup key for question text: two questions that normalize
    to the same string are considered the same question.
    """
    cleaned = _PUNCT_RE.sub(" ", text.lower())
    return " ".join(cleaned.split())


@dataclass
class QuestionNode:
    """One clinical question and its conversation-time attributes."""

    id: str
    question: str
    normalized_text: str
    priority: Priority
    state: NodeState
    label: TopicLabel
    insertion_index: int
    answer: Optional[str] = None

    def to_wire(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "id": self.id,
            "question": self.question,
            "priority": self.priority.wire,
            "state": self.state.wire,
            "label": self.label.wire,
            "insertion_index": self.insertion_index,
        }
        if self.answer is not None:
            doc["answer"] = self.answer
        return doc


class DialogueGraph:
    """The question DAG plus insertion order and the depth-first cursor.

    Mutations for one interview must be serialized by the caller; reads are
    safe to interleave. Node ids are deterministic ("q0", "q1", ...) so a
    replayed session reproduces the same graph byte for byte.
    """

    def __init__(self) -> None:
        self._nodes: dict[str, QuestionNode] = {}
        self._children: dict[str, list[str]] = {}
        self._parents: dict[str, list[str]] = {}
        self._edges: set[tuple[str, str]] = set()
        self._next_index = 0
        # First depth-first arrival at a node claims it; the claim defines
        # the backtracking path when a node has several parents.
        self._dfs_parent: dict[str, str] = {}

    # -- introspection -------------------------------------------------------

    def __len__(self) -> int:
        return len(self._nodes)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    def node(self, node_id: str) -> QuestionNode:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def nodes(self) -> Iterator[QuestionNode]:
        """Nodes in insertion order."""
        return iter(self._nodes.values())

    def edges(self) -> set[tuple[str, str]]:
        return set(self._edges)

    def children(self, node_id: str) -> list[str]:
        self.node(node_id)
        return list(self._children.get(node_id, []))

    def parents(self, node_id: str) -> list[str]:
        self.node(node_id)
        return list(self._parents.get(node_id, []))

    @property
    def roots(self) -> list[str]:
        """Ids of in-degree-zero nodes, in insertion order."""
        return [nid for nid in self._nodes if not self._parents.get(nid)]

    # -- mutation ------------------------------------------------------------

    def add_node(self, question: str, priority: Priority, label: TopicLabel) -> str:
        normalized = normalize_text(question)
        if not normalized:
            raise EmptyQuestion(f"question is empty after normalization: {question!r}")
        node_id = f"q{self._next_index}"
        self._nodes[node_id] = QuestionNode(
            id=node_id,
            question=question,
            normalized_text=normalized,
            priority=priority,
            state=NodeState.OPEN,
            label=label,
            insertion_index=self._next_index,
        )
        self._next_index += 1
        return node_id

    def add_edge(self, parent: str, child: str) -> None:
        self.node(parent)
        self.node(child)
        if (parent, child) in self._edges:
            raise DuplicateEdge(f"{parent} -> {child}")
        if parent == child or self._reaches(child, parent):
            raise CycleDetected(f"{parent} -> {child} would close a cycle")
        self._edges.add((parent, child))
        self._children.setdefault(parent, []).append(child)
        self._parents.setdefault(child, []).append(parent)

    def set_answer(self, node_id: str, answer: str) -> None:
        node = self.node(node_id)
        if node.state is not NodeState.OPEN or node.answer is not None:
            raise AlreadyAnswered(node_id)
        if not answer or not answer.strip():
            raise EmptyAnswer(node_id)
        node.answer = answer

    def transition(self, node_id: str, new_state: NodeState) -> None:
        node = self.node(node_id)
        if (node.state, new_state) not in LEGAL_TRANSITIONS:
            raise InvalidState(
                f"{node_id}: illegal transition {node.state.wire} -> {new_state.wire}"
            )
        node.state = new_state

    # -- traversal -----------------------------------------------------------

    def next_open_node(self, current: Optional[str] = None) -> Optional[str]:
        """Pick the next question to ask, depth-first with priority.

        Starting from ``current``: the best open node in its subtree wins
        (children first, highest priority, earliest insertion on ties);
        failing that, backtrack along the depth-first path to the nearest
        ancestor that still has an open descendant; once the component is
        exhausted, move to the best open root. Returns None when no open
        node remains anywhere.
        """
        if current is not None:
            self.node(current)
            found = self._descend(current)
            if found is not None:
                return found
            for ancestor in self._dfs_ancestors(current):
                found = self._descend(ancestor)
                if found is not None:
                    return found
        return self._next_from_roots()

    def _order_key(self, node_id: str) -> tuple[int, int]:
        node = self._nodes[node_id]
        return (-int(node.priority), node.insertion_index)

    def _descend(self, start: str) -> Optional[str]:
        """Best open node strictly below ``start`` (or an open child of it)."""
        memo: dict[str, bool] = {}
        cursor = start
        while True:
            kids = self._children.get(cursor, [])
            open_kids = [k for k in kids if self._nodes[k].state is NodeState.OPEN]
            if open_kids:
                best = min(open_kids, key=self._order_key)
                self._claim(best, cursor)
                return best
            viable = [k for k in kids if self._open_below(k, memo)]
            if not viable:
                return None
            cursor = min(viable, key=self._order_key)

    def _next_from_roots(self) -> Optional[str]:
        open_roots = [r for r in self.roots if self._nodes[r].state is NodeState.OPEN]
        if open_roots:
            return min(open_roots, key=self._order_key)
        # No open root, but a previously visited component may still hold
        # open nodes (possible on hand-built graphs): descend into the best
        # root that has one rather than reporting a dead end.
        memo: dict[str, bool] = {}
        viable_roots = [r for r in self.roots if self._open_below(r, memo)]
        if not viable_roots:
            return None
        return self._descend(min(viable_roots, key=self._order_key))

    def _open_below(self, node_id: str, memo: dict[str, bool]) -> bool:
        """True if ``node_id`` or anything beneath it is open."""
        cached = memo.get(node_id)
        if cached is not None:
            return cached
        if self._nodes[node_id].state is NodeState.OPEN:
            memo[node_id] = True
            return True
        result = any(
            self._open_below(child, memo)
            for child in self._children.get(node_id, [])
        )
        memo[node_id] = result
        return result

    def _claim(self, node_id: str, parent_id: str) -> None:
        if node_id not in self._dfs_parent:
            self._dfs_parent[node_id] = parent_id

    def _dfs_ancestors(self, node_id: str) -> Iterator[str]:
        """Walk the depth-first arrival path from ``node_id`` toward its root.

        Nodes never claimed by traversal fall back to their earliest parent,
        so the walk also works on hand-built graphs.
        """
        seen = {node_id}
        cursor = self._arrival_parent(node_id)
        while cursor is not None and cursor not in seen:
            yield cursor
            seen.add(cursor)
            cursor = self._arrival_parent(cursor)

    def _arrival_parent(self, node_id: str) -> Optional[str]:
        claimed = self._dfs_parent.get(node_id)
        if claimed is not None:
            return claimed
        parents = self._parents.get(node_id)
        if not parents:
            return None
        return min(parents, key=lambda p: self._nodes[p].insertion_index)

    def _reaches(self, source: str, target: str) -> bool:
        """True if ``target`` is reachable from ``source`` along edges."""
        if source == target:
            return True
        stack = [source]
        visited = {source}
        while stack:
            for child in self._children.get(stack.pop(), []):
                if child == target:
                    return True
                if child not in visited:
                    visited.add(child)
                    stack.append(child)
        return False

    # -- serialization -------------------------------------------------------

    def snapshot(self) -> dict[str, Any]:
        """Lossless wire-format view: nodes sorted by insertion index,
        edges sorted by endpoint insertion indices."""
        nodes = sorted(self._nodes.values(), key=lambda n: n.insertion_index)
        order = {n.id: n.insertion_index for n in nodes}
        edges = sorted(self._edges, key=lambda e: (order[e[0]], order[e[1]]))
        return {
            "nodes": [n.to_wire() for n in nodes],
            "edges": [{"parent": p, "child": c} for p, c in edges],
        }

    @classmethod
    def from_snapshot(cls, snapshot: dict[str, Any]) -> "DialogueGraph":
        graph = cls()
        for doc in sorted(snapshot.get("nodes", []), key=lambda d: d["insertion_index"]):
            node = QuestionNode(
                id=doc["id"],
                question=doc["question"],
                normalized_text=normalize_text(doc["question"]),
                priority=Priority.from_wire(doc["priority"]),
                state=NodeState.from_wire(doc["state"]),
                label=TopicLabel.from_wire(doc["label"]),
                insertion_index=doc["insertion_index"],
                answer=doc.get("answer"),
            )
            graph._nodes[node.id] = node
            graph._next_index = max(graph._next_index, node.insertion_index + 1)
        for edge in snapshot.get("edges", []):
            parent, child = edge["parent"], edge["child"]
            graph.node(parent)
            graph.node(child)
            graph._edges.add((parent, child))
            graph._children.setdefault(parent, []).append(child)
            graph._parents.setdefault(child, []).append(parent)
        return graph
