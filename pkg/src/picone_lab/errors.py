"""Exception hierarchy shared by all modules.

Each exception carries an ``exit_code`` used by the command line front end:
2 for configuration problems, 3 for solver failures, 4 for failed reports.
"""


class LabError(Exception):
    exit_code = 3


class ConfigurationError(LabError, ValueError):
    exit_code = 2


class ExpressionError(ConfigurationError):
    """Raised when a coefficient expression does not parse."""


class DomainError(LabError, ValueError):
    """Evaluation outside the domain of a function (log of a negative, ...)."""

    def __init__(self, message, node=None, x=None):
        super().__init__(message)
        self.node = node
        self.x = x


class EllipticityError(LabError, ValueError):
    pass


class ShiftError(LabError):
    def __init__(self, message, sigma_estimate=None):
        super().__init__(message)
        self.sigma_estimate = sigma_estimate


class IterationError(LabError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NoConvergenceError(IterationError):
    pass


class PositivityError(LabError):
    pass


class SeedError(LabError):
    pass


class ContinuationError(LabError):
    pass


class PreconditionError(LabError, ValueError):
    pass


class CooperativeStructureError(LabError):
    pass


class BoundViolationError(LabError):
    pass


class BlowupError(LabError):
    pass


class ReportFailure(LabError):
    exit_code = 4
