"""Exception hierarchy shared by every module of the package."""


class RavineError(Exception):
    """Base class for all errors raised by this package."""


class NotSymmetric(RavineError, ValueError):
    pass


class NotPositiveSemidefinite(RavineError, ValueError):
    pass


class InvalidCondition(RavineError, ValueError):
    pass


class NonFiniteValue(RavineError, ArithmeticError):
    pass


class EmptyBox(RavineError, ValueError):
    pass


class StepTooLarge(RavineError, ValueError):
    pass


class BetaOutOfRange(RavineError, ValueError):
    pass


class MuRequired(RavineError, ValueError):
    pass


class ProxUnavailable(RavineError, NotImplementedError):
    pass


class HvpRequired(RavineError, ValueError):
    pass


class InsufficientData(RavineError, ValueError):
    pass


class ConfigError(RavineError, ValueError):
    pass


class DivergedError(RavineError, ArithmeticError):
    """Raised when an iterate or recorded value blows up.

    The partially recorded trace (or ODE run), when available, is attached as
    ``partial`` so callers can inspect what happened before the blow-up.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
