"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Rejected input: dimension mismatch, out-of-range parameter, bad config."""


class DomainError(ValueError):
    """A formula was evaluated outside the range where it is stated."""


class ConvergenceError(RuntimeError):
    """A numerical routine did not reach the requested tolerance."""

    def __init__(self, message, estimate=None, bracket=None):
        super().__init__(message)
        self.estimate = estimate
        self.bracket = bracket


class UnsupportedReductionError(ValueError):
    """The function does not reduce to a low enough dimensional subspace."""


class UnconfiguredConstantError(ValueError):
    """A universal constant without a known numeric value was not supplied."""


class CardinalityCapError(RuntimeError):
    """Net enumeration would exceed the configured cardinality cap."""
