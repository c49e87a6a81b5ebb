"""Exception hierarchy.

Errors fall into three classes that the command line maps onto exit codes:
configuration problems (2), data problems (3) and numerical failures (4).
"""


class MarketAdaptiveError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ConfigError(MarketAdaptiveError, ValueError):
    exit_code = 2


class DataError(MarketAdaptiveError):
    exit_code = 3


class InsufficientDataError(DataError):
    pass


class InvalidInputError(DataError, ValueError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NoOverlapError(DataError):
    pass


class InvalidCalendarError(DataError):
    pass


class InvalidRegimeError(InvalidInputError):
    pass


class NumericalError(MarketAdaptiveError, ArithmeticError):
    exit_code = 4


class DegenerateRiskError(NumericalError):
    pass


class DegenerateBetaError(NumericalError):
    pass


class DegenerateBenchmarkError(NumericalError):
    pass


class DegenerateDownsideError(NumericalError):
    pass


class DegenerateTrackingError(NumericalError):
    pass


class DegeneratePortfolioError(NumericalError):
    pass


class SingularMatrixError(NumericalError):
    pass


class InvalidCovarianceError(NumericalError):
    pass


class NoTangencyError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericalFailureError(NumericalError):
    def __init__(self, message, epoch=None):
        if epoch is not None:
            message = f"epoch {epoch}: {message}"
        super().__init__(message)
        self.epoch = epoch
