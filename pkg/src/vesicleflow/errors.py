"""Exception hierarchy shared across the package."""


class VesicleFlowError(Exception):
    """Base class for all package errors."""


class DomainError(VesicleFlowError, ValueError):
    """State outside the admissible set (negative volume fraction,
    occupied fraction above one, or reservoir outside its capacity)."""


class SingularStateError(VesicleFlowError, ValueError):
    """Input on the boundary of the admissible set passed to an
    operation that needs strict interiority (logs, reciprocals)."""


class ConfigError(VesicleFlowError):
    """Malformed or inconsistent run configuration."""


class SolverError(VesicleFlowError):
    """Base class for numerical solver failures."""


class LinearSolverError(SolverError):
    """Singular or numerically unusable linear system."""


class NewtonError(SolverError):
    """Newton iteration did not reach the requested tolerance.

    Carries the iteration report in ``report`` when available.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class TimeStepError(SolverError):
    """A time step failed even after the retry policy was exhausted."""

    def __init__(self, message, step_index=None, report=None):
        super().__init__(message)
        self.step_index = step_index
        self.report = report
