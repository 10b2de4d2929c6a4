class InvalidInputError(ValueError):
    """Input violates a documented precondition."""


class IdentifiabilityError(ValueError):
    """Regressor matrix is rank deficient; gains cannot be identified."""


class SolverFailure(RuntimeError):
    """The NLP solver did not return a usable point."""
