"""Exception types shared across the package."""


class BiharmonicError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(BiharmonicError, ValueError):
    """Invalid, overlapping or badly normalised curve geometry."""


class SingularEvaluationError(BiharmonicError, ValueError):
    """A kernel was evaluated at its singular point."""


class NearBoundaryError(BiharmonicError, ValueError):
    """Field evaluation requested too close to a curve."""

    def __init__(self, message, distance=None):
        super().__init__(message)
        self.distance = distance


class LinearAlgebraError(BiharmonicError, RuntimeError):
    """A dense factorisation or solve failed."""


class DegenerateScaleError(LinearAlgebraError):
    """The single-layer trace operator is (numerically) not invertible."""


class FitError(BiharmonicError, RuntimeError):
    """Far-field least-squares fit is ill-conditioned."""


class ConvergenceError(BiharmonicError, RuntimeError):
    """A discretisation diagnostic stayed above threshold."""
