"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class GridMismatchError(ValueError):
    """Fields passed to one operation live on different grids."""


class NonconvergenceError(RuntimeError):
    """An iterative solve stopped at max_iters above its residual target."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


class MalformedFileError(ValueError):
    """A field or config file could not be parsed; carries a byte offset."""

    def __init__(self, message, byte_offset=None):
        if byte_offset is not None:
            message = f"{message} (byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class ConfigError(ValueError):
    """A run configuration failed parsing or validation."""
