"""Pinhole camera model with radial/tangential distortion.

All math here lives in the camera-optical frame: x right with pixel u,
y down with pixel v, z forward. Distortion follows the standard Brown
layout, radial ``(1 + k1 r^2 + k2 r^4 + k3 r^6)`` plus tangential p1/p2
terms, applied to normalized coordinates before the intrinsic scaling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import DegenerateLinesError, NonPositiveDepthError, UndistortDivergedError

UNDISTORT_MAX_ITERS = 20
UNDISTORT_TOL = 1e-10


class PixelPoint(NamedTuple):
    u: float
    v: float


@dataclass(frozen=True)
class CameraModel:
    """Intrinsics, distortion coefficients and sensor size, all in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    k1: float = 0.0
    k2: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    k3: float = 0.0
    width: int = 1920
    height: int = 1080

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def has_distortion(self) -> bool:
        return any((self.k1, self.k2, self.p1, self.p2, self.k3))

    def intrinsic_matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def contains(self, p: PixelPoint) -> bool:
        return 0.0 <= p.u < self.width and 0.0 <= p.v < self.height


@dataclass(frozen=True)
class ImageLine:
    """An image line through two distinct pixels."""

    p: PixelPoint
    q: PixelPoint

    def __post_init__(self):
        if self.p == self.q:
            raise ValueError("line endpoints must be distinct")


def project(cam: CameraModel, point_cam, apply_distortion: bool = True) -> PixelPoint:
    """Project a camera-frame point (meters) to a pixel.

    Raises NonPositiveDepthError if the point is not strictly in front of
    the camera.
    """
    p = np.asarray(point_cam, dtype=np.float64).reshape(3)
    if p[2] <= 0:
        raise NonPositiveDepthError(f"point depth {p[2]} is not positive")
    x = p[0] / p[2]
    y = p[1] / p[2]
    if apply_distortion and cam.has_distortion:
        xd, yd = _kernels.distort_normalized(
            np.array([x]), np.array([y]), cam.k1, cam.k2, cam.p1, cam.p2, cam.k3
        )
        x, y = float(xd[0]), float(yd[0])
    return PixelPoint(cam.fx * x + cam.cx, cam.fy * y + cam.cy)


def project_batch(cam: CameraModel, points_cam, apply_distortion: bool = True) -> np.ndarray:
    """Vectorized projection of (N, 3) camera-frame points to (N, 2) pixels.

    Points with non-positive depth come back as NaN rows.
    """
    p = np.asarray(points_cam, dtype=np.float64).reshape(-1, 3)
    z = p[:, 2]
    valid = z > 0
    zsafe = np.where(valid, z, 1.0)
    x = p[:, 0] / zsafe
    y = p[:, 1] / zsafe
    if apply_distortion and cam.has_distortion:
        x, y = _kernels.distort_normalized(x, y, cam.k1, cam.k2, cam.p1, cam.p2, cam.k3)
    out = np.column_stack((cam.fx * x + cam.cx, cam.fy * y + cam.cy))
    out[~valid] = np.nan
    return out


def undistort(cam: CameraModel, p: PixelPoint) -> PixelPoint:
    """Ideal-pinhole pixel whose distorted projection reproduces ``p``.

    Fixed-point iteration on normalized coordinates; raises
    UndistortDivergedError instead of clamping when the iteration does not
    converge (extreme distortion or far outside the calibrated field).
    """
    if not cam.has_distortion:
        return p
    out, converged = undistort_batch(cam, np.array([[p.u, p.v]]))
    if not converged[0]:
        raise UndistortDivergedError(
            f"undistortion did not converge at ({p.u:.2f}, {p.v:.2f})"
        )
    return PixelPoint(float(out[0, 0]), float(out[0, 1]))


def undistort_batch(cam: CameraModel, pixels) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized undistortion of (N, 2) pixels.

    Returns (pixels, converged mask); non-converged entries keep their last
    iterate so callers can decide how to report them.
    """
    px = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    xd = (px[:, 0] - cam.cx) / cam.fx
    yd = (px[:, 1] - cam.cy) / cam.fy
    if not cam.has_distortion:
        return px.copy(), np.ones(len(px), dtype=bool)
    x, y, converged = _kernels.undistort_normalized(
        xd, yd, cam.k1, cam.k2, cam.p1, cam.p2, cam.k3, UNDISTORT_MAX_ITERS, UNDISTORT_TOL
    )
    out = np.column_stack((cam.fx * x + cam.cx, cam.fy * y + cam.cy))
    return out, np.asarray(converged, dtype=bool)


def vanishing_point(lines: list[ImageLine]) -> PixelPoint:
    """Least-squares intersection of a family of image lines.

    Minimizes the sum of squared perpendicular distances to every line.
    Raises DegenerateLinesError for fewer than two lines or an (almost)
    mutually parallel family.
    """
    if len(lines) < 2:
        raise DegenerateLinesError("need at least two lines")
    normals = []
    offsets = []
    for line in lines:
        dx = line.q.u - line.p.u
        dy = line.q.v - line.p.v
        n = np.array([-dy, dx]) / np.hypot(dx, dy)
        normals.append(n)
        offsets.append(n @ np.array([line.p.u, line.p.v]))
    a = np.asarray(normals)
    b = np.asarray(offsets)
    ata = a.T @ a
    eigvals = np.linalg.eigvalsh(ata)
    if eigvals[0] < 1e-9 * max(eigvals[-1], 1.0):
        raise DegenerateLinesError("lines are mutually parallel in the image")
    sol = np.linalg.solve(ata, a.T @ b)
    return PixelPoint(float(sol[0]), float(sol[1]))


def pitch_from_vanishing(cam: CameraModel, vp: PixelPoint) -> float:
    """Camera pitch in radians from the vanishing-point row: atan((v - cy)/fy)."""
    return float(np.arctan((vp.v - cam.cy) / cam.fy))


def horizon_row(cam: CameraModel, alpha: float) -> float:
    """Image row where the ground-depth denominator vanishes: cy + fy tan(alpha).

    Pixels at or above this row see no ground.
    """
    if not abs(alpha) < np.pi / 2:
        raise ValueError("pitch must satisfy |alpha| < pi/2")
    return float(cam.cy + cam.fy * np.tan(alpha))
