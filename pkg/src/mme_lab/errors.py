"""Exception hierarchy for mme_lab."""


class MMELabError(Exception):
    """Base class for all library errors."""


class CoprimalityViolation(MMELabError):
    pass


class DegreeTooLow(MMELabError, ValueError):
    pass


class RootSolveFailure(MMELabError):
    pass


class DegreeCapExceeded(MMELabError):
    pass


class ExceptionalSeed(MMELabError):
    pass


class WindowTooSmall(MMELabError):
    pass


class OutOfWindow(MMELabError):
    pass


class UnknownComponent(MMELabError, KeyError):
    pass


class NotAPolynomial(MMELabError):
    pass


class JNotConnected(MMELabError):
    pass


class EpsilonBelowResolution(MMELabError):
    pass


class NotAForwardCycle(MMELabError):
    pass


class ConfigError(MMELabError):
    """Raised for malformed experiment configs; carries a line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
