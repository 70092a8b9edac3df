"""Exception hierarchy shared across the package."""


class EmagentError(Exception):
    """Base class for all package-specific errors."""


# --- provider errors ---------------------------------------------------------

class TransportError(EmagentError):
    """Network, timeout, or non-2xx failure talking to a live provider."""


class EmptyConversation(EmagentError):
    """chat_complete called with no messages."""


class EmptyText(EmagentError):
    """An operation requiring non-blank text received an empty string."""


# --- corpus / retrieval errors -----------------------------------------------

class InvalidDocument(EmagentError):
    """A document record violates its construction invariants."""


class InvalidParams(EmagentError):
    """Operation parameters outside their documented range."""


class DimensionMismatch(EmagentError):
    """Two vectors of different dimensionality were combined."""


class ZeroVector(EmagentError):
    """Cosine similarity is undefined for a zero-norm vector."""


class DuplicateChunkId(EmagentError):
    """An index already contains an entry with this chunk_id."""


# --- toolchain errors ----------------------------------------------------------

class DuplicateFunction(EmagentError):
    """A function with this name is already registered."""


class ExecutionError(EmagentError):
    """A validated call failed in its backend handler.

    The message is written to be fed back to the model on retry.
    """


# --- inventory errors ----------------------------------------------------------

class SchemaError(EmagentError):
    """A data file failed validation; carries the offending location."""

    def __init__(self, message, line=None, item_id=None):
        super().__init__(message)
        self.line = line
        self.item_id = item_id


class IoError(EmagentError):
    """File could not be read."""


class ConflictingFilters(EmagentError):
    """year and year_range were both supplied."""


class KindMismatch(EmagentError):
    """Chart kind incompatible with the supplied table/trend."""


# --- agent errors ----------------------------------------------------------------

class AnswerUnavailable(EmagentError):
    """The provider failed while answering a knowledge query."""


class AnalysisFailed(EmagentError):
    """The function-calling retry loop exhausted its attempts.

    Carries the trace of every attempt so callers can report it.
    """

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = tuple(trace)


# --- evaluation errors -------------------------------------------------------------

class DuplicateId(EmagentError):
    """Benchmark file contains a repeated item_id."""


class EmptyRuns(EmagentError):
    """aggregate_scores needs at least one scored item."""


class MismatchedQuestionSets(EmagentError):
    """Pairwise comparison requires both models scored on the same questions."""
