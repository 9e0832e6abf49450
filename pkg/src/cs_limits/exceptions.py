"""Exception and warning types shared across the package."""


class OutOfRegimeError(ValueError):
    """Inputs fall outside the parameter region where a formula is valid."""


class BudgetExceededError(RuntimeError):
    """An enumeration would exceed the configured work budget."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to converge within its iteration cap."""


class CoverageWarning(UserWarning):
    """A quantization codebook did not reach its target coverage."""
