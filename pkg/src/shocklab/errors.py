"""Exception hierarchy shared across the package.

Exit-code mapping used by the command line front end:
config/parse problems -> 2, numerical failures -> 3.
"""


class ShockLabError(Exception):
    """Base class for all package errors."""


class ConfigError(ShockLabError):
    """Invalid or malformed run configuration."""


class InadmissibleStateError(ShockLabError):
    """A state violates the model's admissibility predicate."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NotADiscontinuityError(ShockLabError):
    """A state pair admits no single jump speed."""


class ContinuationError(ShockLabError):
    """Shock-curve continuation failed to converge."""

    def __init__(self, message, last_s=None):
        super().__init__(message)
        self.last_s = last_s


class VacuumError(ShockLabError):
    """Riemann solution would form vacuum."""


class SolverError(ShockLabError):
    """Nonlinear solve failed."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SimulationError(ShockLabError):
    """Finite-volume run failed mid-flight."""

    def __init__(self, message, time=None, cell=None):
        super().__init__(message)
        self.time = time
        self.cell = cell


class TraceError(ShockLabError):
    """Trace path left the valid domain margin."""


class SelectionError(ShockLabError):
    """Weight selection found no admissible weight."""


class ConstructionError(ShockLabError):
    """Shifted comparison pattern violated a structural invariant."""
