"""Exception hierarchy shared by all textgan modules."""


class TextGanError(Exception):
    """Base class for all errors raised by this package."""


class EmptyCorpusError(TextGanError):
    """Raised when a corpus contains no usable characters ("empty-corpus")."""


class IndexOutOfRangeError(TextGanError):
    """Raised when a symbol id falls outside [0, V) ("index-out-of-range")."""


class BatchTooLargeError(TextGanError):
    """Raised when a requested batch size exceeds the dataset ("batch-too-large")."""


class ShapeError(TextGanError):
    """Raised on tensor shape mismatches ("shape-error")."""


class RangeError(TextGanError):
    """Raised when a scalar argument falls outside its valid range ("range-error")."""


class DivergenceError(TextGanError):
    """Raised when training or a loss produces non-finite values ("divergence").

    Carries the iteration index at which divergence was detected, when known.
    """

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class CheckpointError(TextGanError):
    """Base class for checkpoint read/write failures."""


class IncompatibleCheckpointError(CheckpointError):
    """Raised on checkpoint format-version mismatch ("incompatible-checkpoint")."""


class ChecksumError(CheckpointError):
    """Raised on corrupted or truncated checkpoint data ("checksum-failure")."""


class EmptyInputError(TextGanError):
    """Raised when a metric receives an empty candidate or reference set ("empty-input")."""


class DegenerateCorpusError(TextGanError):
    """Raised when a corpus has no n-grams of the requested order ("degenerate-corpus")."""


class ConfigError(TextGanError):
    """Raised on unparsable or invalid configuration input."""
