"""Exception hierarchy shared across the package."""


class FairFeedbackError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FairFeedbackError, ValueError):
    """Argument outside the mathematical domain of a function."""


class Degenerate(FairFeedbackError):
    """Too few or identical samples to fit a distribution."""


class NonPositiveSample(FairFeedbackError, ValueError):
    pass


class WeibullOverflow(FairFeedbackError, OverflowError):
    pass


class QuadratureFailure(FairFeedbackError, ArithmeticError):
    pass


class EmptyGroup(FairFeedbackError):
    """A demographic split left one side with no recipients."""


class DegeneratePosterior(FairFeedbackError, ArithmeticError):
    pass


class NonFinite(FairFeedbackError, ArithmeticError):
    pass


class ParseError(FairFeedbackError, ValueError):
    pass


class ValidationError(FairFeedbackError, ValueError):
    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class SpecError(FairFeedbackError, ValueError):
    pass


class DataIOError(FairFeedbackError, OSError):
    pass
