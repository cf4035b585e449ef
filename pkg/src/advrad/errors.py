"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class ZeroVector(ValueError):
    """A dual witness was requested for the zero vector."""


class BudgetExceeded(RuntimeError):
    """Pattern enumeration would exceed the configured neuron cap."""


class NoFeasiblePattern(RuntimeError):
    """No candidate sign pattern survived the feasibility checks."""


class DegenerateDual(ArithmeticError):
    """The r-norm gradient is needed at a zero coordinate and cannot balance the residual."""


class OptimalityViolation(AssertionError):
    """An exact perturbation does not sit where optimality theory requires."""


class HypothesisViolated(ValueError):
    """A bound was requested on data that violates its hypothesis."""

    def __init__(self, message: str, indices=()):
        super().__init__(message)
        self.indices = list(indices)
