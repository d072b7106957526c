"""Exception hierarchy.

Everything raised on purpose derives from :class:`PHDAEError`. The CLI maps
:class:`ShapeError` (malformed input) to exit code 2 and every other
:class:`PHDAEError` (a mathematical failure) to exit code 1.
"""


class PHDAEError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(PHDAEError, ValueError):
    """Coefficient shapes are not conformable, or the input is malformed."""


class SingularTransformError(PHDAEError):
    """A transformation matrix is numerically singular on the grid."""


class FitError(PHDAEError):
    """Polynomial re-fit of a coefficient function exceeded its tolerance."""


class StructureError(PHDAEError):
    """Input violates a structural precondition (skew-adjointness, block pattern)."""


class RankAssumptionError(PHDAEError):
    """A constant-rank or full-rank assumption of a reduction step fails.

    ``matrix`` and ``singular_values`` carry the offending data when known.
    """

    def __init__(self, message, matrix=None, singular_values=None):
        super().__init__(message)
        self.matrix = matrix
        self.singular_values = singular_values


class HighIndexError(PHDAEError):
    """The system has differentiation index greater than one where <= 1 is needed."""


class TimeVaryingError(PHDAEError):
    """Operation is only implemented for constant coefficients."""


class InconsistentInitialValueError(PHDAEError):
    """Initial state violates the algebraic constraints at the initial time."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
