"""Exception hierarchy shared across the toolkit."""


class CurbGeomError(Exception):
    """Base class for all toolkit errors."""


class FrameMismatchError(CurbGeomError):
    """Transforms composed across incompatible frames."""


class NoPathError(CurbGeomError):
    """No calibration path connects the requested frames."""


class DuplicateEdgeError(CurbGeomError):
    """Edge insertion would create a second path between two frames."""


class NonPositiveDepthError(CurbGeomError):
    """Projection requested for a point at or behind the image plane."""


class UndistortDivergedError(CurbGeomError):
    """Undistortion fixed-point iteration failed to converge."""


class DegenerateLinesError(CurbGeomError):
    """Vanishing-point estimation from parallel or missing lines."""


class AtOrAboveHorizonError(CurbGeomError):
    """Ground-depth formula evaluated at or above the horizon row."""


class ParallelRayError(CurbGeomError):
    """Pixel ray parallel to the ground plane."""


class BehindCameraError(CurbGeomError):
    """Ray-plane intersection falls behind the camera."""


class DegenerateGeometryError(CurbGeomError):
    """Input configuration is rank-deficient for the requested fit."""


class InsufficientDataError(CurbGeomError):
    """Fewer samples than the operation's minimum."""


class RefineDivergedError(CurbGeomError):
    """Pose refinement produced a non-finite residual."""


class SchemaError(CurbGeomError):
    """A file violated its declared schema.

    Carries the 1-based line number when the violation is line-local.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
