"""Exception types shared across the package."""


class ShotfitError(Exception):
    """Base class for all shotfit errors."""


class PointBehindCamera(ShotfitError):
    """Projection was requested for a point at or behind the camera plane."""


class DegenerateGeometry(ShotfitError):
    """Triangulation design matrix is rank deficient (near-parallel rays)."""


class DegenerateInput(ShotfitError):
    """Input point set carries no usable spatial extent."""


class NonFiniteResidual(ShotfitError):
    """A residual callback produced NaN or Inf; signals a modeling bug."""


class InitializationFailed(ShotfitError):
    """Stage-1 depth initialization produced a non-finite estimate."""


class NoVisibleJoints(ShotfitError):
    """All ground-truth joint confidences are zero."""


class LengthMismatch(ShotfitError):
    """Paired joint lists have different lengths."""


class SchemaError(ShotfitError):
    """A JSON document violates its schema. Carries a JSON-pointer path."""

    def __init__(self, message: str, json_path: str = ""):
        super().__init__(message)
        self.json_path = json_path


class RejectionBudgetExceeded(ShotfitError):
    """Scene generation exhausted its placement attempts."""


class MissingGroundTruth(ShotfitError):
    """A result id has no ground-truth counterpart."""
