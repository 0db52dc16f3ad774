"""Exception hierarchy shared across the package.

Each class carries the process exit code the command-line front end maps it to.
"""


class CtlqrError(Exception):
    exit_code = 1


class ConfigurationError(CtlqrError, ValueError):
    """Invalid user configuration or precondition violation."""

    exit_code = 2


class DimensionError(ConfigurationError):
    """Matrix shapes are incompatible."""


class DataError(CtlqrError):
    """Collected data fails a rank or consistency requirement."""

    exit_code = 3


class RankError(DataError):
    pass


class GenerationError(DataError):
    """A randomized generator ran out of redraws."""


class NumericalError(CtlqrError):
    exit_code = 4


class ConvergenceError(NumericalError):
    """An iterative solver stopped above its tolerance.

    Attributes
    ----------
    residual : float
        Last relative residual reached.
    condition : float or None
        Condition number of the data block used, when known.
    """

    def __init__(self, message, residual=float("nan"), condition=None):
        super().__init__(message)
        self.residual = residual
        self.condition = condition


class SingularityError(NumericalError):
    pass


class ConsistencyError(NumericalError):
    """A computed quantity violates a structural guarantee (e.g. symmetry)."""


class StabilityError(CtlqrError):
    """A gain or closed-loop matrix is not Hurwitz where one is required."""

    exit_code = 5
