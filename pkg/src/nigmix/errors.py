"""Exception types shared across the fitting machinery."""


class UndefinedMomentError(ValueError):
    """A requested distribution moment does not exist for the parameters."""


class NumericalBreakdownError(RuntimeError):
    """A posterior update left the state outside its valid domain."""

    def __init__(self, message, cluster=None):
        super().__init__(message)
        self.cluster = cluster


class DegenerateFitError(RuntimeError):
    """Every cluster fell below the pruning threshold."""
