"""Exception types raised across the package."""


class AWEQError(Exception):
    """Base class for every error raised by aweq."""


class ShapeError(AWEQError, ValueError):
    pass


class EmptyInputError(AWEQError, ValueError):
    pass


class InvalidInputError(AWEQError, ValueError):
    pass


class InvalidRangeError(InvalidInputError):
    pass


class UnsupportedFoldError(AWEQError):
    """A scale cannot be pushed through a non positive-homogeneous activation."""


class UnsupportedSizeError(AWEQError, ValueError):
    pass


class ValidationError(AWEQError, ValueError):
    pass


class MissingTensorError(ValidationError, KeyError):
    pass


class FormatError(AWEQError, ValueError):
    """Bad magic, version or dtype code in a tensor container."""


class CorruptionError(FormatError):
    """Container ended before the declared contents were read."""
