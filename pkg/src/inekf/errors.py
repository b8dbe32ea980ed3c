"""Exception types shared across the package."""


class BranchCutError(ValueError):
    """Rotation angle at or beyond the logarithm's principal branch."""


class NotInAlgebraError(ValueError):
    """Matrix does not lie in the span of the Lie algebra basis."""


class ProjectionError(ValueError):
    """Matrix too far from the group manifold to be projected back."""


class ModelInconsistencyError(ValueError):
    """Analytic linearization disagrees with the numeric Jacobian."""


class UpdateSkippedError(RuntimeError):
    """Innovation covariance too ill-conditioned to invert."""


class NumericalFailureError(RuntimeError):
    """Non-finite values encountered during filtering."""
