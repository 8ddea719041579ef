"""Exception types raised by the holonomic optimizers."""


class HolonomicError(Exception):
    """Base class for all errors raised by this package."""


class SingularPoint(HolonomicError):
    """A Pfaffian system was evaluated on its singular locus."""


class SingularPath(HolonomicError):
    """A propagation segment comes too close to the singular locus."""


class SingularHessian(HolonomicError):
    """The Newton system could not be solved even after damping."""


class LineSearchFailed(HolonomicError):
    """No step size above ``alpha_min`` satisfied the Armijo test."""


class EmptyData(HolonomicError, ValueError):
    """An angle sample with no observations."""
