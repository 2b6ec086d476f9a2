"""Exception types raised across the package."""


class MachZeroError(Exception):
    """Base class for all solver errors."""


class DomainError(MachZeroError, ValueError):
    """Argument outside the domain of a thermodynamic function."""


class RangeError(MachZeroError, ValueError):
    """Evaluation outside the admissible range (vacuum, off-mesh section, empty window)."""


class NumericalError(MachZeroError, RuntimeError):
    """An iterative procedure failed to converge."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class GeometryError(MachZeroError, ValueError):
    """Degenerate nozzle map or mesh."""


class AssemblyError(MachZeroError, ValueError):
    """Invalid input to finite element assembly."""


class ConfigError(MachZeroError, ValueError):
    """Invalid run configuration."""
