"""Exception types shared across the package."""


class PBDiskError(Exception):
    """Base class for pbdisk failures."""


class InfeasibleParametersError(PBDiskError, ValueError):
    """Physical parameters violate a solvability constraint."""


class GridMismatchError(PBDiskError, ValueError):
    """Two objects live on incompatible grids."""


class ConvergenceError(PBDiskError, RuntimeError):
    """An iterative solve failed to reach its tolerance."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class TruncationError(PBDiskError, RuntimeError):
    """A truncated domain is too short for the requested accuracy."""


class DependencyError(PBDiskError, RuntimeError):
    """A pipeline stage is missing an upstream artifact."""


class CorruptDumpError(PBDiskError, RuntimeError):
    """A field dump failed its header/payload consistency check."""
