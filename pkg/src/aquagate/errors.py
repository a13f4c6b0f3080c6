"""Exception hierarchy shared by all aquagate modules."""


class AquagateError(Exception):
    """Base class for every error raised by this package."""


class DecodeError(AquagateError):
    """Image file is corrupt or in an unsupported format."""


class TooSmallError(AquagateError):
    """Image is below the minimum size required by the operation."""


class IoError(AquagateError):
    """Failed to read or write an output artifact."""


class ParseError(AquagateError):
    """Manifest or report file does not match its schema."""


class DuplicateIdError(ParseError):
    """Manifest contains the same id more than once."""


class DimMismatchError(AquagateError):
    """Embeddings of different dimensionality were combined."""


class BadMagicError(AquagateError):
    """Binary file does not start with the expected magic bytes."""


class TruncatedRecordError(AquagateError):
    """Binary file ends in the middle of a record."""


class ZeroNormEmbeddingError(AquagateError):
    """Embedding has zero norm and cannot be normalized."""


class TooFewSamplesError(AquagateError):
    """Fewer samples than the operation requires."""


class EmptyAssignmentError(AquagateError):
    """Cluster assignment holds no samples."""


class LengthMismatchError(AquagateError):
    """Parallel sequences have different lengths."""


class EmptyInputError(AquagateError):
    """Operation requires at least one element."""


class EmptyScoresError(EmptyInputError):
    """Threshold calibration needs a non-empty score list."""


class PerplexityTooLargeError(AquagateError):
    """Perplexity must be below (N - 1) / 3."""


class WindowTooLargeError(AquagateError):
    """Box-filter window exceeds what reflect padding supports."""


class PlanMismatchError(AquagateError):
    """Depth plan does not match the image dimensions."""


class MissingResultError(AquagateError):
    """Pre-computed result image not found for an id."""


class DimensionMismatchError(AquagateError):
    """Two images that must share dimensions do not."""


class MissingProfileError(AquagateError):
    """Manifest id has no similarity profile."""


class MissingEmbeddingError(AquagateError):
    """Precomputed embeddings file has no record for an id or prompt."""


class ProviderUnavailableError(AquagateError):
    """Embedding provider cannot be reached."""


class ManifestMismatchError(AquagateError):
    """Two runs that must share a manifest do not."""
