"""Exception types raised by the solver library."""


class LcpgError(Exception):
    """Base class for every error raised by the library."""


class DimensionError(LcpgError, ValueError):
    pass


class ConfigError(LcpgError, ValueError):
    pass


class InfeasibleStartError(LcpgError):
    """Initial point or anchor is not strictly feasible."""

    def __init__(self, message, worst_violation=None):
        super().__init__(message)
        self.worst_violation = worst_violation


class UnsupportedTermError(LcpgError):
    """Raised when a prox term combination has no closed form."""


class UnsupportedStructureError(LcpgError):
    """Feasible set / conjugate pair without a closed-form maximizer."""


class InteriorViolationError(LcpgError):
    pass


class FactorizationError(LcpgError):
    pass


class NumericalFailureError(LcpgError):
    pass


class IterationBudgetError(LcpgError):
    pass


class UncertifiedSolutionError(LcpgError):
    """A subsolver answer could not be certified (budget exhausted or multipliers not stationary)."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class InvariantViolationError(LcpgError):
    pass


class RunAbortedError(LcpgError):
    """An outer run stopped early; ``result`` holds the partial trace."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class DatasetParseError(LcpgError, ValueError):
    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number
