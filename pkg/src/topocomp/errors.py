"""Exception types shared across the package."""


class DegenerateFieldError(ValueError):
    """Field has zero range (constant values) where a nonzero range is required."""


class InternalConsistencyError(RuntimeError):
    """A structural invariant of the tree/segmentation machinery was violated."""


class CorruptArchiveError(ValueError):
    """Archive bytes are malformed, truncated, or fail checksum validation."""


class UnsupportedArchiveError(ValueError):
    """Archive is valid but references a codec or base compressor we cannot run."""


class UnsupportedSizeError(ValueError):
    """Input exceeds a configured exact-computation cap."""


class TighteningLimitError(RuntimeError):
    """Progressive bound tightening exceeded its correction ceiling."""
