"""Exception types shared across the package.

The CLI maps each class to a distinct process exit code.
"""


class GTransferError(Exception):
    """Base class for all package errors."""


class ConfigError(GTransferError, ValueError):
    """Invalid parameters, configuration keys or values."""


class TableLimitError(GTransferError):
    """A dense table over S^d would exceed the configured entry limit."""

    def __init__(self, depth: int, size: int, limit: int):
        self.depth = depth
        self.size = size
        self.limit = limit
        super().__init__(
            f"table over words of length d={depth} on an alphabet of size |S|={size} "
            f"needs {size}**{depth} entries, limit is {limit}"
        )


class NonConvergenceError(GTransferError):
    """An iterative solver did not reach its tolerance."""
