"""Exception hierarchy. Every error carries the CLI exit code it maps to."""


class LabError(Exception):
    exit_code = 1


class ConfigError(LabError):
    exit_code = 2


class NumericalError(LabError):
    exit_code = 3


class DomainError(NumericalError, ValueError):
    """A point outside the open ball, or a parameter outside its range."""


class NetSizeError(NumericalError):
    pass


class OutOfDepthError(NumericalError):
    pass


class StarvationError(NumericalError):
    """A set captured no quadrature node (or fewer than required)."""


class SolverError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class CoveringError(NumericalError):
    pass


class BumpConditionError(NumericalError):
    """A Young function is outside the 𝓑_p class where the statement needs it."""
