"""Cold-start pipeline: source documents to a prioritized seed question set.

Diagnostic-algorithm documents are turned into patient-friendly candidate
questions, embedded, clustered in two levels (broad, then refined), stripped
of rare clusters, and reduced to one representative question per surviving
broad cluster. The published seed set ships built in so an interview can
start without running the pipeline at all.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyCorpus, EmptyTree, TooFewPoints
from .gateway import normalize_vectors
from .graph import Priority, TopicLabel

logger = logging.getLogger(__name__)

DEFAULT_K1 = 10
DEFAULT_K2 = 5
DEFAULT_MIN_FRACTION = 0.01
KMEANS_MAX_ITERATIONS = 100
DEFAULT_EMBED_PARALLELISM = 4
EMBED_BATCH_SIZE = 64

QUESTION_TOOL = {
    "name": "question_generation",
    "description": (
        "Produce concise, patient-friendly interview questions extracted "
        "from a diagnostic algorithm, each with a clinical justification "
        "and a medical-note category."
    ),
    "parameters": {
        "type": "object",
        "properties": {
            "questions": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "properties": {
                        "question": {"type": "string"},
                        "justification": {"type": "string"},
                        "label": {
                            "type": "string",
                            "enum": [l.wire for l in TopicLabel],
                        },
                    },
                    "required": ["question", "justification", "label"],
                },
            },
        },
        "required": ["questions"],
    },
}

# Acceptance validation is looser than the advertised schema: a backend that
# drifts off the label enum yields a rejected candidate, not a dead document.
_QUESTION_RESPONSE_SCHEMA = {
    "type": "object",
    "properties": {
        "questions": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "question": {"type": "string"},
                    "justification": {"type": "string"},
                    "label": {"type": "string"},
                },
                "required": ["question", "justification", "label"],
            },
        },
    },
    "required": ["questions"],
}


@dataclass
class SourceDocument:
    id: str
    specialty: str
    body: str


@dataclass
class ParseReport:
    documents: list[SourceDocument]
    rejects: list[dict[str, Any]]


@dataclass(frozen=True)
class CandidateQuestion:
    question: str
    justification: str
    label: TopicLabel
    source_id: str


@dataclass
class EmbeddedQuestion:
    candidate: CandidateQuestion
    vector: np.ndarray


@dataclass
class Cluster:
    centroid: np.ndarray
    members: list[int]

    def size(self) -> int:
        return len(self.members)


@dataclass
class ClusterTree:
    """Two-level partition of the embedded corpus.

    ``level2[i]`` refines ``level1[i]``; ``filtered_out`` holds members
    removed by rarity filtering, which appear in no cluster afterwards.
    """

    level1: list[Cluster]
    level2: list[list[Cluster]]
    corpus_size: int
    filtered_out: list[int] = field(default_factory=list)

    def summary(self) -> dict[str, Any]:
        return {
            "corpus_size": self.corpus_size,
            "level1_sizes": [c.size() for c in self.level1],
            "level2_sizes": [[c.size() for c in subs] for subs in self.level2],
            "filtered_out": len(self.filtered_out),
        }


@dataclass(frozen=True)
class SeedQuestion:
    question: str
    priority: Priority
    label: TopicLabel

    def to_wire(self) -> dict[str, str]:
        return {
            "question": self.question,
            "priority": self.priority.wire,
            "label": self.label.wire,
        }

    @classmethod
    def from_wire(cls, doc: dict[str, str]) -> "SeedQuestion":
        return cls(
            question=doc["question"],
            priority=Priority.from_wire(doc["priority"]),
            label=TopicLabel.from_wire(doc["label"]),
        )


def parse_documents(raw: Iterable[Any]) -> ParseReport:
    """Parse line-delimited or pre-decoded document records.

    Accepts JSON strings (one record per line) or already-decoded mappings.
    Malformed records are collected with the reason, not fatal; zero valid
    records is.
    """
    documents: list[SourceDocument] = []
    rejects: list[dict[str, Any]] = []
    for position, item in enumerate(raw):
        record = item
        if isinstance(item, (str, bytes)):
            text = item.strip()
            if not text:
                continue
            try:
                record = json.loads(text)
            except json.JSONDecodeError as exc:
                rejects.append({"position": position, "reason": f"invalid JSON: {exc}"})
                continue
        if not isinstance(record, dict):
            rejects.append({"position": position, "reason": "record is not an object"})
            continue
        body = record.get("body")
        if not body or not str(body).strip():
            rejects.append({"position": position, "reason": "missing or empty body"})
            continue
        documents.append(
            SourceDocument(
                id=str(record.get("id", f"doc{position}")),
                specialty=str(record.get("specialty", "")),
                body=str(body),
            )
        )
    if not documents:
        raise EmptyCorpus("no valid documents in input")
    if rejects:
        logger.warning("parse_documents rejected %d record(s)", len(rejects))
    return ParseReport(documents=documents, rejects=rejects)


def generate_questions(doc: SourceDocument, backend: Any) -> list[CandidateQuestion]:
    """Ask the backend for patient-friendly questions for one document.

    Candidates with labels outside the ten-category set are rejected and
    reported rather than failing the document.
    """
    from .gateway import ToolCallRequest
    from .errors import BackendError

    prompt = (
        "Extract concise, patient-friendly interview questions from the "
        f"following diagnostic algorithm (specialty: {doc.specialty or 'general'}). "
        "Pair every question with a clinical justification and assign one "
        "medical-note category.\n\n"
        f"{doc.body}"
    )
    request = ToolCallRequest(
        messages=[{"role": "user", "content": prompt}],
        tool_schema=QUESTION_TOOL,
        response_schema=_QUESTION_RESPONSE_SCHEMA,
    )
    try:
        response = backend.chat_structured(request)
    except BackendError as exc:
        raise BackendError(f"question generation failed for document {doc.id}: {exc}") from exc
    candidates: list[CandidateQuestion] = []
    for raw in response["questions"]:
        try:
            label = TopicLabel.from_wire(raw["label"])
        except ValueError:
            logger.warning(
                "document %s: candidate %r rejected (label %r outside the category set)",
                doc.id, raw["question"], raw["label"],
            )
            continue
        candidates.append(
            CandidateQuestion(
                question=raw["question"],
                justification=raw["justification"],
                label=label,
                source_id=doc.id,
            )
        )
    return candidates


def embed_questions(
    candidates: Sequence[CandidateQuestion],
    backend: Any,
    *,
    parallelism: int = DEFAULT_EMBED_PARALLELISM,
    batch_size: int = EMBED_BATCH_SIZE,
) -> list[EmbeddedQuestion]:
    """Embed candidate question text into unit vectors, order preserved.

    Batches go to the backend with bounded parallelism; the justification
    text is not embedded, only the question itself.
    """
    if not candidates:
        raise ValueError("embed_questions requires at least one candidate")
    batches = [
        list(candidates[start : start + batch_size])
        for start in range(0, len(candidates), batch_size)
    ]
    if len(batches) == 1 or parallelism <= 1:
        vector_batches = [backend.embed([c.question for c in batch]) for batch in batches]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            vector_batches = list(
                pool.map(lambda batch: backend.embed([c.question for c in batch]), batches)
            )
    vectors = [vector for batch in vector_batches for vector in batch]
    dims = {v.shape[0] for v in vectors}
    if len(dims) != 1:
        raise DimensionMismatch(f"backend returned inconsistent dimensions: {sorted(dims)}")
    vectors = normalize_vectors(vectors)
    return [
        EmbeddedQuestion(candidate=c, vector=v) for c, v in zip(candidates, vectors)
    ]


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: spread initial centroids by squared distance."""
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = points[first]
    closest_sq = np.sum((points - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = float(closest_sq.sum())
        if total <= 0.0:
            # All remaining points coincide with a centroid; fall back to
            # uniform choice so k centroids always exist.
            choice = int(rng.integers(n))
        else:
            choice = int(rng.choice(n, p=closest_sq / total))
        centroids[i] = points[choice]
        closest_sq = np.minimum(closest_sq, np.sum((points - centroids[i]) ** 2, axis=1))
    return centroids


def _kmeans(
    points: np.ndarray, k: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd iterations to an assignment fixpoint (or the iteration cap).

    Points are unit vectors, so Euclidean assignment is equivalent to
    cosine. Returns (assignments, centroids).
    """
    centroids = _kmeans_pp_init(points, k, rng)
    assignments = np.full(points.shape[0], -1, dtype=int)
    for _ in range(KMEANS_MAX_ITERATIONS):
        distances = np.linalg.norm(points[:, None, :] - centroids[None, :, :], axis=2)
        new_assignments = distances.argmin(axis=1)
        if np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        for i in range(k):
            mask = assignments == i
            if mask.any():
                centroids[i] = points[mask].mean(axis=0)
    return assignments, centroids


def hierarchical_cluster(
    embedded: Sequence[EmbeddedQuestion],
    k1: int = DEFAULT_K1,
    k2: int = DEFAULT_K2,
    seed: int = 0,
) -> ClusterTree:
    """Two-level k-means: broad clusters, then refined sub-clusters.

    Broad clusters smaller than k2 are kept whole as a single sub-cluster.
    Deterministic for a fixed seed.
    """
    if k1 < 1 or k2 < 1:
        raise ValueError("k1 and k2 must be positive")
    if len(embedded) < k1:
        raise TooFewPoints(f"{len(embedded)} point(s) cannot form {k1} clusters")
    points = np.stack([e.vector for e in embedded])
    rng = np.random.default_rng(seed)
    assignments, centroids = _kmeans(points, k1, rng)

    level1: list[Cluster] = []
    level2: list[list[Cluster]] = []
    for i in range(k1):
        member_indices = [int(j) for j in np.flatnonzero(assignments == i)]
        cluster = Cluster(centroid=centroids[i].copy(), members=member_indices)
        level1.append(cluster)
        if len(member_indices) >= k2 and k2 > 1:
            sub_rng = np.random.default_rng((seed, i))
            sub_points = points[member_indices]
            sub_assignments, sub_centroids = _kmeans(sub_points, k2, sub_rng)
            subs = []
            for s in range(k2):
                sub_members = [
                    member_indices[int(j)] for j in np.flatnonzero(sub_assignments == s)
                ]
                subs.append(Cluster(centroid=sub_centroids[s].copy(), members=sub_members))
            level2.append(subs)
        else:
            level2.append([Cluster(centroid=centroids[i].copy(), members=list(member_indices))])
    return ClusterTree(level1=level1, level2=level2, corpus_size=len(embedded))


def filter_rare_clusters(tree: ClusterTree, min_fraction: float) -> ClusterTree:
    """Drop refined clusters holding less than ``min_fraction`` of the corpus.

    Filtered members disappear from both levels and land in
    ``filtered_out``. Centroids are kept as computed at clustering time.
    """
    if not 0.0 < min_fraction < 1.0:
        raise ValueError(f"min_fraction must be in (0, 1), got {min_fraction}")
    cutoff = min_fraction * tree.corpus_size
    filtered = set(tree.filtered_out)
    new_level2: list[list[Cluster]] = []
    for subs in tree.level2:
        kept_subs = []
        for sub in subs:
            members = [m for m in sub.members if m not in filtered]
            if len(members) < cutoff:
                filtered.update(members)
            else:
                kept_subs.append(Cluster(centroid=sub.centroid.copy(), members=members))
        new_level2.append(kept_subs)
    new_level1 = [
        Cluster(
            centroid=cluster.centroid.copy(),
            members=[m for m in cluster.members if m not in filtered],
        )
        for cluster in tree.level1
    ]
    if all(not c.members for c in new_level1):
        logger.warning("rarity filtering removed every member; tree is empty")
    return ClusterTree(
        level1=new_level1,
        level2=new_level2,
        corpus_size=tree.corpus_size,
        filtered_out=sorted(filtered),
    )


def _priority_for_label(label: TopicLabel) -> Priority:
    if label is TopicLabel.CHIEF_COMPLAINT:
        return Priority.URGENT
    if label in (
        TopicLabel.MEDICATIONS,
        TopicLabel.ALLERGY,
        TopicLabel.REVIEW_OF_SYSTEMS,
        TopicLabel.HISTORY_OF_PRESENT_ILLNESS,
    ):
        return Priority.HIGH
    if label is TopicLabel.SOCIAL_HISTORY:
        return Priority.LOW
    return Priority.INTERMEDIATE


def select_seed_questions(
    tree: ClusterTree, embedded: Sequence[EmbeddedQuestion]
) -> list[SeedQuestion]:
    """One seed per surviving broad cluster: the member nearest its centroid.

    When two clusters elect the same topic label, the candidate closer to
    its own centroid wins, so every label appears at most once.
    """
    best_by_label: dict[TopicLabel, tuple[float, int, SeedQuestion]] = {}
    survivors = [c for c in tree.level1 if c.members]
    if not survivors:
        raise EmptyTree("no clusters survive to select seeds from")
    for order, cluster in enumerate(survivors):
        centroid_norm = float(np.linalg.norm(cluster.centroid))
        if centroid_norm == 0.0:
            continue
        direction = cluster.centroid / centroid_norm
        similarities = [
            (float(np.dot(embedded[m].vector, direction)), -m) for m in cluster.members
        ]
        best_sim, neg_index = max(similarities)
        member = -neg_index
        candidate = embedded[member].candidate
        seed = SeedQuestion(
            question=candidate.question,
            priority=_priority_for_label(candidate.label),
            label=candidate.label,
        )
        incumbent = best_by_label.get(candidate.label)
        if incumbent is None or best_sim > incumbent[0]:
            best_by_label[candidate.label] = (best_sim, order, seed)
    if not best_by_label:
        raise EmptyTree("no usable cluster centroids")
    chosen = sorted(best_by_label.values(), key=lambda entry: entry[1])
    return [seed for _, _, seed in chosen]


def builtin_seed_set() -> list[SeedQuestion]:
    """The published cold-start question set with its manual priorities."""
    return [
        SeedQuestion(
            "Can you describe the symptoms you are currently experiencing and when they started?",
            Priority.HIGH,
            TopicLabel.HISTORY_OF_PRESENT_ILLNESS,
        ),
        SeedQuestion(
            "Have you had any recent illnesses or infections?",
            Priority.INTERMEDIATE,
            TopicLabel.HISTORY_OF_PRESENT_ILLNESS,
        ),
        SeedQuestion(
            "Have you experienced any recent weight loss?",
            Priority.HIGH,
            TopicLabel.REVIEW_OF_SYSTEMS,
        ),
        SeedQuestion(
            "Do you have any chronic illnesses or conditions that you have been diagnosed with in the past?",
            Priority.INTERMEDIATE,
            TopicLabel.PAST_MEDICAL_HISTORY,
        ),
        SeedQuestion(
            "Are you currently taking any medications?",
            Priority.HIGH,
            TopicLabel.MEDICATIONS,
        ),
        SeedQuestion(
            "What is the primary health issue or symptom that prompted you to seek medical attention today?",
            Priority.URGENT,
            TopicLabel.CHIEF_COMPLAINT,
        ),
        SeedQuestion(
            "Have you had any recent surgeries or medical procedures?",
            Priority.INTERMEDIATE,
            TopicLabel.PAST_SURGICAL_HISTORY,
        ),
        SeedQuestion(
            "Do you have any known allergies to medications?",
            Priority.HIGH,
            TopicLabel.ALLERGY,
        ),
        SeedQuestion(
            "Are you currently pregnant or planning to become pregnant?",
            Priority.INTERMEDIATE,
            TopicLabel.GYNECOLOGIC_HISTORY,
        ),
        SeedQuestion(
            "Is there a history of any significant medical conditions or diseases in your family?",
            Priority.INTERMEDIATE,
            TopicLabel.FAMILY_HISTORY,
        ),
        SeedQuestion(
            "Do you consume alcohol or use recreational drugs?",
            Priority.LOW,
            TopicLabel.SOCIAL_HISTORY,
        ),
    ]


def write_corpus_file(
    path: str,
    seeds: Sequence[SeedQuestion],
    tree: Optional[ClusterTree] = None,
    provenance: Optional[dict[str, Any]] = None,
) -> None:
    document = {
        "version": 1,
        "seeds": [s.to_wire() for s in seeds],
        "clusters": tree.summary() if tree is not None else None,
        "provenance": provenance or {},
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2)
        handle.write("\n")


def load_corpus_seeds(path: str) -> list[SeedQuestion]:
    """Seed list from a pipeline output file (or a bare {seeds: [...]})."""
    from .errors import CorpusLoadError

    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
        seeds = [SeedQuestion.from_wire(doc) for doc in document["seeds"]]
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CorpusLoadError(f"cannot load corpus from {path}: {exc}") from exc
    if not seeds:
        raise CorpusLoadError(f"corpus at {path} holds no seed questions")
    return seeds
