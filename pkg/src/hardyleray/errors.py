"""Exception hierarchy shared by every module of the toolkit."""


class HardyError(Exception):
    """Base class for all toolkit errors."""


class InvalidDimension(HardyError, ValueError):
    pass


class UnsupportedRegime(HardyError):
    """Closed forms requested below the Hardy threshold (or vice versa)."""


class WrongRegime(UnsupportedRegime):
    pass


class DomainError(HardyError, ValueError):
    pass


class UnknownKind(HardyError, KeyError):
    pass


class ToleranceNotMet(HardyError):
    """Adaptive quadrature stopped before reaching the requested accuracy."""

    def __init__(self, message, estimate=float("nan"), error=float("inf")):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class DivergentIntegral(HardyError):
    """A weighted integral was shown to diverge at an endpoint.

    ``fit`` is the :class:`~hardyleray.quadrature.GrowthFit` describing how the
    truncated integral grows as the cut shrinks.
    """

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


class Inconclusive(HardyError):
    """Neither convergence nor divergence could be established."""


class NoSolution(HardyError):
    """The source fails weighted integrability, so no solution exists."""

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


class NoLimit(HardyError):
    """A limit extraction detected oscillation or non-convergence."""


class SingularDiagonal(HardyError, ValueError):
    pass


class TruncationError(HardyError):
    def __init__(self, message, estimate=float("nan"), tail=float("inf")):
        super().__init__(message)
        self.estimate = estimate
        self.tail = tail


class ProbeFailure(HardyError):
    """A probe contradicted a certified outcome; points to an implementation bug."""


class NumericFailure(HardyError):
    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket
