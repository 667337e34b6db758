"""
Custom exceptions for avfuse.

Provides granular error handling for the different failure scenarios
of the fusion pipeline (bad arguments, numeric blow-ups, corrupt files, I/O).
"""


class AvFuseError(Exception):
    """Base exception for all avfuse errors."""

    pass


class InvalidArgumentError(AvFuseError, ValueError):
    """
    Raised when an operation receives an argument outside its contract.

    Examples:
    - Empty or non-finite vector passed to softmax
    - Paired sequences with mismatched shapes
    - Top-k count outside [1, T]
    - Class index outside [0, C)
    """

    pass


class ConfigError(InvalidArgumentError):
    """Raised when a JSON config file does not match TrainConfig/SynthConfig."""

    pass


class NumericFailureError(AvFuseError, ArithmeticError):
    """
    Raised when a computation produces NaN or infinity.

    Training raises it when an update leaves non-finite parameters.
    """

    pass


class FormatError(AvFuseError):
    """
    Raised when a file on disk does not match its declared format.

    The message names the failing check: "bad magic", "truncated",
    "shape overflow", "version", "dims", "shape".
    """

    pass


class DatasetIOError(AvFuseError, OSError):
    """Raised when a manifest, feature file or report cannot be read or written."""

    pass
