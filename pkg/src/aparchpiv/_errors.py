"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain of the operation."""


class MomentDivergenceError(DomainError):
    """A requested moment of the innovation distribution does not exist."""


class ConvergenceError(RuntimeError):
    """A numerical procedure failed to reach its tolerance."""


class QuadratureError(ConvergenceError):
    """Adaptive quadrature hit its subdivision limit."""


class SingularHessianError(ConvergenceError):
    """The likelihood Hessian cannot be inverted."""

    def __init__(self, message, condition_number=float("inf")):
        super().__init__(message)
        self.condition_number = condition_number
