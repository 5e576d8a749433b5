"""Exception types shared across the package."""


class OscLabError(Exception):
    """Base class for all package errors."""


class EmptyInputError(OscLabError, ValueError):
    """An operation received an empty record, list or series."""


class InvalidArgumentError(OscLabError, ValueError):
    """A parameter is outside its documented domain."""


class InvalidDataError(OscLabError, ValueError):
    """Input data is malformed (non-finite values, bad ranges, bad fields)."""


class InsufficientDataError(OscLabError, ValueError):
    """A series is too short for the requested windowing."""


class OutOfRangeError(OscLabError, ValueError):
    """A value exceeds its allowed range."""


class ShapeError(OscLabError, ValueError):
    """Tensor shapes do not line up."""


class MaskError(OscLabError, ValueError):
    """An attention mask leaves a query row with nothing to attend to."""


class ModelNotReadyError(OscLabError, RuntimeError):
    """A trained model (or controller) is required but not available."""


class TrainingDivergedError(OscLabError, RuntimeError):
    """Training hit a non-finite loss. Carries the last good checkpoint."""

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint
