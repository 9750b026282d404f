"""Shared exception types."""


class GanadError(Exception):
    """Base class for all library errors."""


class ConfigError(GanadError):
    """A configuration is invalid or internally inconsistent."""


class ShapeError(GanadError):
    """An input tensor does not match the expected shape."""

    def __init__(self, expected, actual, what="input"):
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        super().__init__(f"{what} shape mismatch: expected {self.expected}, got {self.actual}")


class CheckpointError(GanadError):
    """A checkpoint directory is missing, corrupt, or inconsistent."""


class NumericsError(GanadError):
    """A non-finite value was produced where a finite one is required."""
