"""Adaptive medical-interview engine.

A DAG of clinical questions is traversed depth-first by priority; every
answer is judged prune-or-expand by a schema-constrained backend call; the
interview ends on topic coverage (or a hard exchange cap) and is synthesized
into a category-ordered medical report.
"""

from .corpus import SeedQuestion, builtin_seed_set
from .decisions import (
    ConversationHistory,
    Decision,
    DecisionType,
    EngineConfig,
    FollowUpQuestion,
    InterviewState,
    apply_decision,
    build_evaluation_prompt,
    evaluate,
    is_duplicate,
    step,
)
from .errors import AnamnesisError
from .gateway import (
    BackendConfig,
    HashEmbedder,
    HttpBackend,
    ScriptedBackend,
    ScriptRule,
    ToolCallRequest,
)
from .graph import (
    DialogueGraph,
    NodeState,
    Priority,
    QuestionNode,
    TopicLabel,
    normalize_text,
)
from .report import CategorySection, MedicalReport, assemble_report
from .service import InterviewEvent, Session, SessionStore, load_events, replay_events
from .simulate import Persona, answer_for, builtin_persona, run_interview
from .termination import (
    CoverageReport,
    TerminationConfig,
    TerminationReason,
    should_terminate,
    termination_score,
)

__version__ = "0.1.0"

__all__ = [
    "AnamnesisError",
    "BackendConfig",
    "CategorySection",
    "ConversationHistory",
    "CoverageReport",
    "Decision",
    "DecisionType",
    "DialogueGraph",
    "EngineConfig",
    "FollowUpQuestion",
    "HashEmbedder",
    "HttpBackend",
    "InterviewEvent",
    "InterviewState",
    "MedicalReport",
    "NodeState",
    "Persona",
    "Priority",
    "QuestionNode",
    "ScriptRule",
    "ScriptedBackend",
    "SeedQuestion",
    "Session",
    "SessionStore",
    "TerminationConfig",
    "TerminationReason",
    "ToolCallRequest",
    "TopicLabel",
    "answer_for",
    "apply_decision",
    "assemble_report",
    "build_evaluation_prompt",
    "builtin_persona",
    "builtin_seed_set",
    "evaluate",
    "is_duplicate",
    "load_events",
    "normalize_text",
    "replay_events",
    "run_interview",
    "should_terminate",
    "step",
    "termination_score",
]
