"""Exception types shared across the package."""


class SemtextError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(SemtextError):
    """Vectors with different dimensions were combined."""


class ZeroVector(SemtextError):
    """A vector with norm below 1e-12 where a direction is required."""


class EmptyInput(SemtextError):
    """A text was blank (or token-free) where content is required."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class ProviderUnavailable(SemtextError):
    """The embedding provider failed after all retries."""


class DimensionDrift(SemtextError):
    """A remote provider returned vectors of an unexpected dimension."""


class CacheCorrupt(SemtextError):
    """A cache record failed its checksum or framing checks."""


class EmptyCorpus(SemtextError):
    """A corpus with no usable documents."""


class DuplicateId(SemtextError):
    """An id already present in the index was added again."""


class CorruptFile(SemtextError):
    """An index file failed magic, framing, or checksum validation."""


class VersionUnsupported(SemtextError):
    """An index file with an unknown format version."""


class ScorerUnavailable(SemtextError):
    """The external reranking scorer could not be reached or answered badly."""


class OutOfRange(SemtextError):
    """A similarity score outside [-1, 1]."""


class KTooLarge(SemtextError):
    """More clusters requested than points available."""


class DegenerateRow(SemtextError):
    """A distance row that is all zeros (duplicate points)."""


class ModelMismatch(SemtextError):
    """Query embedded with a different model than the index contents."""


class TemplateInvalid(SemtextError):
    """A prompt template missing or repeating a required placeholder."""


class LlmUnavailable(SemtextError):
    """The answer-generation endpoint failed."""


class IoFailure(SemtextError):
    """A file could not be read or written."""
