"""Exception types raised by the numerical routines."""


class RegLabError(Exception):
    """Base class for all numerical failures in the package."""


class DomainViolation(RegLabError, ArithmeticError):
    """A spectral product is not representable in double precision.

    Raised when an element is not in the domain of an unbounded operator
    ``g(A)`` at the working resolution, e.g. ``e^{(tau-t)A} psi`` for data
    whose high modes carry too much mass.
    """


class ParameterOverflow(RegLabError, ArithmeticError):
    """A regularization parameter makes the amplification ``e^{(tau-t)beta}``
    unrepresentable."""


class NoBracket(RegLabError, ValueError):
    """The noise level is too large for a positive truncation level."""


class QuadratureTolerance(RegLabError):
    """Richardson error estimate of a composite rule exceeds the tolerance."""


class BoundViolation(RegLabError, AssertionError):
    """A measured error exceeded the theoretical bound it was paired with."""
