"""Exception types raised across the package."""


class ZetarError(Exception):
    """Base class for all package errors."""


class ScenarioError(ZetarError, ValueError):
    """A scenario or its parameters fail validation."""


class SizeGuardError(ScenarioError):
    """A scenario constructor would produce an unreasonably large instance."""


class ZeroProbabilitySignal(ZetarError):
    """A posterior was requested for a signal that is never sent."""

    def __init__(self, signal, prob):
        super().__init__(f"signal {signal} has probability {prob:.3g}; posterior undefined")
        self.signal = signal
        self.prob = prob


class NotBinaryActions(ZetarError, ValueError):
    pass


class NumericalFailure(ZetarError, RuntimeError):
    """A linear program failed to reach an optimal basis."""


class NotConverged(ZetarError, RuntimeError):
    """An iterative solver stopped at its iteration cap.

    The best iterate found so far is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class InfeasibleSupport(ZetarError, ValueError):
    """No trustworthy policy lives on the support of the default policy."""


class NotLinearlyDependent(ZetarError, ValueError):
    pass


class NotAligned(ZetarError, ValueError):
    pass


class PreconditionViolated(ZetarError, ValueError):
    pass


class DegenerateFace(ZetarError):
    pass


class DimensionTooLarge(ZetarError, ValueError):
    pass


class DegenerateHull(ZetarError):
    pass


class BudgetExceeded(ZetarError, RuntimeError):
    """The episodic oracle could not realize the probed signal within its cap."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class OracleInconsistent(ZetarError, RuntimeError):
    """Oracle answers contradict convexity of the trusted region."""
