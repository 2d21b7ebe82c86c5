"""Exception types shared across the package."""


class ReeError(Exception):
    """Base class for all errors raised by :mod:`reecont`."""


class NotHermitian(ReeError, ValueError):
    pass


class NonPositiveSpectrum(ReeError, ValueError):
    pass


class DimensionMismatch(ReeError, ValueError):
    pass


class NotDensityMatrix(ReeError, ValueError):
    """Raised when a matrix fails density-matrix validation.

    ``reason`` is one of ``"trace"``, ``"positivity"`` or ``"hermiticity"``.
    """

    def __init__(self, reason, message=None):
        self.reason = reason
        super().__init__(message or f"not a density matrix ({reason})")


class NotProbabilityVector(ReeError, ValueError):
    pass


class OutOfDomain(ReeError, ValueError):
    pass


class ConvergenceFailure(ReeError, RuntimeError):
    """An iterative routine ran out of iterations.

    ``partial`` carries the best result found so far when one exists.
    """

    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)


class NotInSet(ReeError, ValueError):
    pass


class SamplingExhausted(ReeError, RuntimeError):
    pass
