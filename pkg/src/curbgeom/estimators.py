"""Per-object ground-plane distance estimators.

Two routes to a metric position from a 2D detection:

* the closed-form ground-depth estimator: pitch/roll-calibrated camera at a
  known height lifts the box's road-contact pixel to a camera-frame 3D
  point (closed form, exact when roll is zero);
* a control-point homography (IPM) mapping image pixels onto a flat ground
  plane, fitted with the normalized DLT.

The exact ray-plane intersection is kept alongside as the oracle the
closed form is checked against.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .camera import CameraModel, PixelPoint, horizon_row
from .errors import (
    AtOrAboveHorizonError,
    BehindCameraError,
    DegenerateGeometryError,
    InsufficientDataError,
    NonPositiveDepthError,
    ParallelRayError,
)
from .frames import FrameId, FrameKind, rotation_from_pitch_roll

logger = logging.getLogger(__name__)

DEPTH_DENOMINATOR_EPS = 1e-9


@dataclass(frozen=True)
class GroundPlane:
    """Plane ``normal . Q + d = 0`` with a unit normal, in a stated frame."""

    normal: np.ndarray
    d: float
    source_frame: FrameId

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(n)
        if norm < 1e-12:
            raise ValueError("plane normal must be nonzero")
        n = n / norm
        n.flags.writeable = False
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "d", float(self.d) / norm)

    @classmethod
    def from_pitch_roll(
        cls, alpha: float, gamma: float, height: float, source_frame: FrameId | None = None
    ) -> "GroundPlane":
        """Camera-frame ground plane of a camera at ``height`` with the given
        pitch and roll: normal is the second row of the camera-to-road
        rotation and the intercept is minus the height."""
        if source_frame is None:
            source_frame = FrameId(FrameKind.CAMERA_OPTICAL, "anon")
        normal = rotation_from_pitch_roll(alpha, gamma)[1]
        return cls(normal, -height, source_frame)

    def signed_distance(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.normal + self.d


@dataclass(frozen=True)
class P3DConfig:
    """Everything the closed-form estimator needs about one camera mount."""

    camera: CameraModel
    height: float
    alpha: float
    gamma: float = 0.0

    def __post_init__(self):
        if self.height <= 0:
            raise ValueError("camera height must be positive")
        if not (abs(self.alpha) < np.pi / 2 and abs(self.gamma) < np.pi / 2):
            raise ValueError("pitch and roll must satisfy |angle| < pi/2")

    def ground_plane(self) -> GroundPlane:
        return GroundPlane.from_pitch_roll(self.alpha, self.gamma, self.height)

    def camera_foot_point(self) -> np.ndarray:
        """Orthogonal projection of the camera center onto the ground plane,
        in the camera frame."""
        plane = self.ground_plane()
        return -plane.d * plane.normal


@dataclass(frozen=True)
class ContactPoint:
    """A detection's assumed road-contact pixel."""

    pixel: PixelPoint
    source_bbox_id: str = ""


class EstimateStatus(Enum):
    OK = "ok"
    OUT_OF_BOUNDS = "out_of_bounds"
    AT_OR_ABOVE_HORIZON = "at_or_above_horizon"
    MAPS_TO_INFINITY = "maps_to_infinity"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Estimate:
    """Per-item batch output: position when status is OK, a reason otherwise."""

    source_bbox_id: str
    pixel: PixelPoint
    status: EstimateStatus
    point: np.ndarray | None = None

    @property
    def retained(self) -> bool:
        return self.status is EstimateStatus.OK


def contact_point(bbox, source_bbox_id: str = "") -> ContactPoint:
    """Midpoint of a 2D box's lower edge: ((u1+u2)/2, v2)."""
    u1, v1, u2, v2 = (float(x) for x in bbox)
    if not (u1 < u2 and v1 < v2):
        raise ValueError(f"degenerate box [{u1}, {v1}, {u2}, {v2}]")
    return ContactPoint(PixelPoint((u1 + u2) / 2.0, v2), source_bbox_id)


def p3d_depth(cfg: P3DConfig, v: float) -> float:
    """Closed-form ground depth for image row ``v``.

    z = height * fy / (-fy sin(alpha) + (v - cy) cos(alpha)); exact when the
    roll is zero, an approximation otherwise. Raises AtOrAboveHorizonError
    when the denominator is not safely positive (the infinite-depth regime).
    """
    cam = cfg.camera
    denom = -cam.fy * np.sin(cfg.alpha) + (v - cam.cy) * np.cos(cfg.alpha)
    if denom <= DEPTH_DENOMINATOR_EPS:
        raise AtOrAboveHorizonError(
            f"row {v} is at or above the horizon row {horizon_row(cam, cfg.alpha):.2f}"
        )
    return float(cfg.height * cam.fy / denom)


def p3d_backproject(cam: CameraModel, p: PixelPoint, z: float) -> np.ndarray:
    """Camera-frame point of pixel ``p`` at depth ``z``:
    x = (u - cx) z / fx, y = (v - cy) z / fy."""
    if z <= 0:
        raise NonPositiveDepthError(f"depth {z} is not positive")
    return np.array([(p.u - cam.cx) * z / cam.fx, (p.v - cam.cy) * z / cam.fy, z])


def exact_ground_intersection(cam: CameraModel, plane: GroundPlane, p: PixelPoint) -> np.ndarray:
    """Intersect the (undistorted) pixel ray with the plane, no approximation.

    The result satisfies plane.normal . Q + plane.d = 0 to machine accuracy;
    raises for rays parallel to the plane or intersections behind the camera.
    """
    ray = np.array([(p.u - cam.cx) / cam.fx, (p.v - cam.cy) / cam.fy, 1.0])
    denom = float(plane.normal @ ray)
    if abs(denom) < 1e-15:
        raise ParallelRayError("pixel ray is parallel to the ground plane")
    t = -plane.d / denom
    if t <= 0:
        raise BehindCameraError("ground intersection lies behind the camera")
    return t * ray


def p3d_batch(cfg: P3DConfig, contacts: list[ContactPoint]) -> list[Estimate]:
    """Run the closed-form estimator over many contact points.

    Out-of-bounds pixels and pixels at or above the horizon are skipped per
    item (never aborting the batch); skipped items keep their position in
    the output with a status explaining the skip. Retained items carry a
    finite camera-frame point and appear in input order.
    """
    if not contacts:
        return []
    cam = cfg.camera
    u = np.array([c.pixel.u for c in contacts])
    v = np.array([c.pixel.v for c in contacts])
    in_bounds = (u >= 0) & (u < cam.width) & (v >= 0) & (v < cam.height)
    z = np.asarray(
        _kernels.ground_depth(v, cam.fy, cam.cy, cfg.height, cfg.alpha, DEPTH_DENOMINATOR_EPS)
    )
    x, y = _kernels.backproject(u, v, np.where(np.isnan(z), 1.0, z), cam.fx, cam.fy, cam.cx, cam.cy)

    out: list[Estimate] = []
    for i, c in enumerate(contacts):
        if not in_bounds[i]:
            logger.debug("skipping %s: contact pixel outside image bounds", c.source_bbox_id)
            out.append(Estimate(c.source_bbox_id, c.pixel, EstimateStatus.OUT_OF_BOUNDS))
        elif np.isnan(z[i]):
            logger.debug("skipping %s: contact pixel at or above horizon", c.source_bbox_id)
            out.append(Estimate(c.source_bbox_id, c.pixel, EstimateStatus.AT_OR_ABOVE_HORIZON))
        else:
            point = np.array([x[i], y[i], z[i]])
            out.append(Estimate(c.source_bbox_id, c.pixel, EstimateStatus.OK, point))
    return out


def p3d_distance(cfg: P3DConfig, point_cam) -> float:
    """Distance from an estimated camera-frame point to the camera's ground
    foot point (the declared distance definition for method comparisons)."""
    return float(np.linalg.norm(np.asarray(point_cam) - cfg.camera_foot_point()))


def _normalizing_similarity(points: np.ndarray) -> np.ndarray:
    centroid = points.mean(axis=0)
    dist = np.linalg.norm(points - centroid, axis=1).mean()
    if dist < 1e-12:
        raise DegenerateGeometryError("coincident control points")
    s = np.sqrt(2.0) / dist
    return np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )


def ipm_fit(correspondences: list[tuple[PixelPoint, tuple[float, float]]]) -> tuple[np.ndarray, float]:
    """Fit the pixel-to-ground homography with the normalized DLT.

    Each correspondence pairs an image pixel with its surveyed ground
    coordinates (meters). Returns (H, rms residual in meters); H maps
    homogeneous pixels to homogeneous ground coordinates.
    """
    if len(correspondences) < 4:
        raise InsufficientDataError("homography fit needs at least 4 correspondences")
    px = np.array([[p.u, p.v] for p, _ in correspondences], dtype=np.float64)
    gd = np.array([[g[0], g[1]] for _, g in correspondences], dtype=np.float64)

    tp = _normalizing_similarity(px)
    tg = _normalizing_similarity(gd)
    pn = np.column_stack((px, np.ones(len(px)))) @ tp.T
    gn = np.column_stack((gd, np.ones(len(gd)))) @ tg.T

    rows = []
    for (x, y, _), (gx, gz, _) in zip(pn, gn):
        rows.append([-x, -y, -1.0, 0.0, 0.0, 0.0, gx * x, gx * y, gx])
        rows.append([0.0, 0.0, 0.0, -x, -y, -1.0, gz * x, gz * y, gz])
    a = np.asarray(rows)
    _, s, vt = np.linalg.svd(a)
    if s[-2] < 1e-9 * max(s[0], 1.0):
        raise DegenerateGeometryError("rank-deficient correspondences (collinear layout)")
    h = vt[-1].reshape(3, 3)
    h = np.linalg.inv(tg) @ h @ tp

    scale = h[2, 2] if abs(h[2, 2]) > 1e-12 else h.flat[np.argmax(np.abs(h))]
    h = h / scale

    mapped = np.column_stack((px, np.ones(len(px)))) @ h.T
    if np.any(np.abs(mapped[:, 2]) < 1e-12):
        raise DegenerateGeometryError("a control point maps to infinity under the fit")
    residuals = mapped[:, :2] / mapped[:, 2:] - gd
    rms = float(np.sqrt(np.mean(np.sum(residuals**2, axis=1))))
    return h, rms


def ipm_ground_point(h: np.ndarray, p: PixelPoint) -> np.ndarray:
    """Map a pixel through the homography to ground coordinates (meters)."""
    mapped = h @ np.array([p.u, p.v, 1.0])
    if abs(mapped[2]) < 1e-12:
        raise ParallelRayError("pixel maps to infinity (at the fitted horizon)")
    return mapped[:2] / mapped[2]


def ipm_distance(h: np.ndarray, p: PixelPoint, camera_ground_xy) -> float:
    """Ground-plane distance from the mapped pixel to the camera foot point."""
    g = ipm_ground_point(h, p)
    return float(np.linalg.norm(g - np.asarray(camera_ground_xy, dtype=np.float64)))
