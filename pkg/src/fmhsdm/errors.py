"""Exception types shared across the package."""


class FmhsdmError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(FmhsdmError):
    """Operands have incompatible dimensions."""


class EstimatorFailureError(FmhsdmError):
    """A spectral estimator failed to converge.

    Carries the last estimate when one is available.
    """

    def __init__(self, message, last_estimate=None):
        super().__init__(message)
        self.last_estimate = last_estimate


class NotPsdError(FmhsdmError):
    """Operator has an eigenvalue below the PSD slack."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class NotStronglyPositiveError(FmhsdmError):
    """Operator fails the requested strong-positivity threshold."""


class EmptyFixedPointSetError(FmhsdmError):
    """No fixed point exists within tolerance."""


class InfeasibleConstraintError(FmhsdmError):
    """A linear constraint system has no solution."""


class StepSizeError(FmhsdmError):
    """Step-size parameters violate the admissible range."""


class VariantMismatchError(FmhsdmError):
    """Problem structure is incompatible with the requested solver variant."""


class UnsupportedProblemError(FmhsdmError):
    """No adapter exists for this (solver, problem) combination."""


class DivergenceError(FmhsdmError):
    """Iterates became non-finite or exceeded the divergence guard."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class MetricCorruptionError(FmhsdmError):
    """A quadratic form that must be nonnegative evaluated negative."""


class ConfigError(FmhsdmError):
    """Invalid benchmark or solver configuration."""
