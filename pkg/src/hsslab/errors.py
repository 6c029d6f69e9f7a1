"""Exception types shared across the package."""


class UsageError(ValueError):
    """Invalid request: unknown model, mismatched operands, bad parameters."""


class DomainError(ValueError):
    """Input lies outside the domain of a map or spectral function."""


class NumericalError(RuntimeError):
    """An iterative method failed to converge or an invariant drifted."""
