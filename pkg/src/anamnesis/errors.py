"""Exception hierarchy shared across the interview engine."""


class AnamnesisError(Exception):
    """Base class for all errors raised by this package."""


# --- dialogue graph ---------------------------------------------------------


class UnknownNode(AnamnesisError):
    """Referenced node id does not exist in the graph."""


class EmptyQuestion(AnamnesisError):
    """Question text is empty after normalization."""


class DuplicateEdge(AnamnesisError):
    """The edge is already present."""


class CycleDetected(AnamnesisError):
    """Adding the edge would create a directed cycle."""


class AlreadyAnswered(AnamnesisError):
    """The node already holds an answer (or is no longer open)."""


class EmptyAnswer(AnamnesisError):
    """Answer text is empty."""


class InvalidState(AnamnesisError):
    """Node state does not permit the requested transition or operation."""


# --- corpus pipeline --------------------------------------------------------


class EmptyCorpus(AnamnesisError):
    """No valid documents found in the input."""


class DimensionMismatch(AnamnesisError):
    """Embedding vectors are inconsistent in size or non-normalizable."""


class TooFewPoints(AnamnesisError):
    """Not enough points to form the requested number of clusters."""


class EmptyTree(AnamnesisError):
    """Cluster tree holds no surviving clusters."""


class CorpusLoadError(AnamnesisError):
    """Seed corpus file is missing or malformed."""


# --- llm gateway ------------------------------------------------------------


class BackendError(AnamnesisError):
    """Generic backend failure."""


class TransportError(BackendError):
    """Network-level failure talking to the backend."""


class BackendTimeout(TransportError):
    """Backend call exceeded the configured timeout."""


class AuthError(BackendError):
    """Backend rejected the credentials."""


class ScriptExhausted(BackendError):
    """Scripted backend has no matching canned response left."""


class SchemaViolation(AnamnesisError):
    """Structured backend output does not satisfy the declared schema."""


# --- sessions ---------------------------------------------------------------


class NoPendingQuestion(AnamnesisError):
    """No open question is awaiting an answer."""


class SessionNotFound(AnamnesisError):
    """Unknown session id."""


class NotActive(AnamnesisError):
    """Session is no longer accepting answers."""


class NotTerminated(AnamnesisError):
    """Report requested before the interview ended."""


class StaleTurnToken(AnamnesisError):
    """Turn token does not match the pending question."""
