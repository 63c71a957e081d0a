"""Exception and warning types."""


class RotatestError(Exception):
    pass


class ModelEvaluationError(RotatestError, ValueError):
    """A model returned a non-finite probability or derivative."""


class EstimationError(RotatestError):
    """The maximum likelihood search failed; ``best`` holds the best point found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SingularInformationError(RotatestError, ArithmeticError):
    """The per-subgroup information matrix is (numerically) singular."""


class IdentifiabilityError(RotatestError, ValueError):
    """More parameters than a subgroup of size m can identify (K + 1 > 2**m)."""


class ReplicationFailureError(RotatestError):
    """Too many Monte Carlo replications failed and had to be resampled."""

    def __init__(self, message, failures=0, replications=0, results=None):
        super().__init__(message)
        self.failures = failures
        self.replications = replications
        # cells completed before the failure was detected
        self.results = [] if results is None else results


class DegeneracyWarning(UserWarning):
    """Subgroup outcome probabilities put (almost) all mass on one outcome."""
