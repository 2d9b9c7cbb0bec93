"""Exception hierarchy shared by every module."""


class CotrackError(Exception):
    """Base class for all package errors."""


class InvalidArgument(CotrackError, ValueError):
    pass


class ConfigError(CotrackError, ValueError):
    """A configuration key failed validation."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class DataError(CotrackError, ValueError):
    """Malformed on-disk data (ground truth, lookup tables, results)."""


class NumericalError(CotrackError, ArithmeticError):
    pass


class SingularError(NumericalError):
    pass


class TrackingLost(CotrackError):
    pass
