"""Exception types raised across the package."""


class ScenePoseError(Exception):
    """Base class for all package errors."""


class ValidationError(ScenePoseError, ValueError):
    """Input violates a documented precondition or invariant."""


class InvalidRotation(ValidationError):
    pass


class EmptyCloud(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class DimMismatch(ValidationError):
    pass


class LevelOutOfRange(ValidationError):
    pass


class InvalidDepth(ValidationError):
    pass


class NoForeground(ValidationError):
    pass


class EmptyShape(ScenePoseError):
    pass


class CapacityExceeded(ScenePoseError):
    pass


class TapeExhausted(ScenePoseError):
    pass


class OverlapRejected(ScenePoseError):
    pass


class TensorFormatError(ValidationError):
    pass
