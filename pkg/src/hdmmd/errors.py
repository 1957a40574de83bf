"""Exception hierarchy shared by every module."""


class HdMmdError(Exception):
    """Base class for all errors raised by :mod:`hdmmd`."""


class ConfigError(HdMmdError, ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class DomainError(HdMmdError, ValueError):
    pass


class UnsupportedOrder(HdMmdError, ValueError):
    pass


class EmptyInput(HdMmdError, ValueError):
    pass


class DegenerateBandwidth(HdMmdError, ValueError):
    pass


class DimensionMismatch(HdMmdError, ValueError):
    pass


class TooFewSamples(HdMmdError, ValueError):
    pass


class TooFewValues(HdMmdError, ValueError):
    pass


class DegenerateVariance(HdMmdError, ArithmeticError):
    pass


class HypothesisViolated(HdMmdError, ValueError):
    pass


class MissingSummary(HdMmdError, ValueError):
    pass


class NotPositiveSemiDefinite(HdMmdError, ValueError):
    pass


class SingularMatrix(HdMmdError, ArithmeticError):
    pass
