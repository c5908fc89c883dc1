"""Sensor-pose calibration from ground returns and 2D-3D correspondences.

Two independent problems:

* deriving the LiDAR-base frame (pole ground contact, x-o-y plane in the
  local ground) from a RANSAC ground-plane fit of the sensor's returns;
* refining a camera extrinsic by Levenberg-Marquardt over the reprojection
  error of surveyed 2D-3D feature pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraModel, PixelPoint, project_batch
from .errors import DegenerateGeometryError, InsufficientDataError, RefineDivergedError
from .estimators import GroundPlane
from .frames import FrameId, FrameKind, RigidTransform

LM_LAMBDA0 = 1e-3
LM_LAMBDA_CAP = 1e8
HUBER_DELTA_PX = 3.0


@dataclass(frozen=True)
class PointCloud:
    """LiDAR returns in the sensor's own frame, meters."""

    points: np.ndarray
    intensity: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.isfinite(pts).all():
            raise ValueError("point cloud contains non-finite coordinates")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.intensity is not None:
            inten = np.asarray(self.intensity, dtype=np.float64).reshape(-1)
            if len(inten) != len(pts):
                raise ValueError("intensity length does not match point count")
            object.__setattr__(self, "intensity", inten)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class Correspondence2D3D:
    """An image pixel paired with its surveyed map-frame position."""

    pixel: PixelPoint
    world: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.world, dtype=np.float64).reshape(3)
        if not (np.isfinite(w).all() and np.isfinite([self.pixel.u, self.pixel.v]).all()):
            raise ValueError("correspondence contains non-finite values")
        w.flags.writeable = False
        object.__setattr__(self, "world", w)


def fit_ground_plane(
    cloud: PointCloud,
    ransac_iters: int = 500,
    inlier_tol: float = 0.05,
    seed: int = 0,
    min_inlier_ratio: float = 0.3,
    source_frame: FrameId | None = None,
) -> tuple[GroundPlane, np.ndarray]:
    """RANSAC plane fit with a least-squares refinement over the inliers.

    Three-point minimal samples score by inlier count (ties keep the
    earliest hypothesis); the winning consensus set is refined through the
    eigen-decomposition of its covariance. The normal is oriented so the
    sensor origin lies on the positive side. Returns (plane, inlier mask);
    the mask is recomputed against the refined plane.

    Deterministic for a fixed seed.
    """
    pts = cloud.points
    n = len(pts)
    if n < 3:
        raise InsufficientDataError("plane fit needs at least 3 points")
    if source_frame is None:
        source_frame = FrameId(FrameKind.LIDAR_EGO, "anon")

    rng = np.random.default_rng(seed)
    scale = max(float(np.abs(pts).max()), 1.0)
    best_count = 0
    best_mask: np.ndarray | None = None
    for _ in range(ransac_iters):
        i, j, k = rng.choice(n, size=3, replace=False)
        normal = np.cross(pts[j] - pts[i], pts[k] - pts[i])
        norm = np.linalg.norm(normal)
        if norm < 1e-12 * scale * scale:
            continue
        normal = normal / norm
        dist = np.abs((pts - pts[i]) @ normal)
        mask = dist <= inlier_tol
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
    if best_mask is None or best_count < 3:
        raise DegenerateGeometryError("no plane hypothesis found (collinear cloud?)")

    inliers = pts[best_mask]
    centroid = inliers.mean(axis=0)
    centered = inliers - centroid
    _, eigvecs = np.linalg.eigh(centered.T @ centered)
    normal = eigvecs[:, 0]
    d = -float(normal @ centroid)
    if d < 0:  # orient the normal so the sensor origin is on the positive side
        normal, d = -normal, -d
    plane = GroundPlane(normal, d, source_frame)

    mask = np.abs(plane.signed_distance(pts)) <= inlier_tol
    ratio = float(mask.sum()) / n
    if ratio < min_inlier_ratio:
        raise DegenerateGeometryError(
            f"inlier ratio {ratio:.3f} below the configured floor {min_inlier_ratio}"
        )
    return plane, mask


def lidar_base_from_ground(plane: GroundPlane, sensor_id: str | None = None) -> RigidTransform:
    """LiDAR-ego to LiDAR-base transform from a fitted ground plane.

    LiDAR-base: z axis along the plane normal, origin at the orthogonal
    projection of the sensor origin onto the plane, x axis the sensor's
    x axis projected into the plane.
    """
    if sensor_id is None:
        sensor_id = plane.source_frame.sensor_id
    height = float(plane.d)
    if height <= 1e-9:
        raise DegenerateGeometryError("sensor origin is not above the fitted plane")
    z_axis = plane.normal
    x_axis = np.array([1.0, 0.0, 0.0]) - z_axis[0] * z_axis
    norm = np.linalg.norm(x_axis)
    if norm < 1e-9:
        raise DegenerateGeometryError("sensor x axis is parallel to the plane normal")
    x_axis = x_axis / norm
    y_axis = np.cross(z_axis, x_axis)
    rotation = np.vstack((x_axis, y_axis, z_axis))
    origin = -height * z_axis
    return RigidTransform(
        rotation,
        -rotation @ origin,
        FrameId(FrameKind.LIDAR_EGO, sensor_id),
        FrameId(FrameKind.LIDAR_BASE, sensor_id),
    )


def _so3_exp(w: np.ndarray) -> np.ndarray:
    angle = float(np.linalg.norm(w))
    k = np.array(
        [[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]]
    )
    if angle < 1e-12:
        return np.eye(3) + k
    a = np.sin(angle) / angle
    b = (1.0 - np.cos(angle)) / (angle * angle)
    return np.eye(3) + a * k + b * (k @ k)


def _reprojection_residuals(
    cam: CameraModel,
    rotation: np.ndarray,
    translation: np.ndarray,
    world: np.ndarray,
    pixels: np.ndarray,
    huber_delta: float | None,
) -> np.ndarray:
    cam_pts = world @ rotation.T + translation
    proj = project_batch(cam, cam_pts)
    residual = proj - pixels
    if huber_delta is not None:
        err = np.linalg.norm(residual, axis=1)
        w = np.where(err > huber_delta, huber_delta / np.maximum(err, 1e-30), 1.0)
        residual = residual * np.sqrt(w)[:, None]
    return residual.ravel()


def refine_extrinsic(
    cam: CameraModel,
    init: RigidTransform,
    corrs: list[Correspondence2D3D],
    max_iters: int = 100,
    tol: float = 1e-10,
    robust: bool = False,
) -> tuple[RigidTransform, float]:
    """Levenberg-Marquardt pose refinement against 2D-3D correspondences.

    ``init`` maps world (map-frame) points into the camera frame; the
    refined pose minimizes the reprojection error sum ||project(R w + t) -
    pixel||^2 over a 6-parameter local increment (rotation applied as a
    left-multiplied so(3) exponential). Damping starts at 1e-3, grows x10
    on a rejected step and shrinks /10 on an accepted one; steps are only
    ever accepted when they reduce the residual, so the returned pose is
    never worse than ``init``. ``robust`` switches on a Huber weight at
    3 px for outlier-contaminated correspondences.

    Returns (pose, rms residual in pixels).
    """
    if len(corrs) < 4:
        raise InsufficientDataError("pose refinement needs at least 4 correspondences")
    world = np.array([c.world for c in corrs])
    pixels = np.array([[c.pixel.u, c.pixel.v] for c in corrs])
    huber = HUBER_DELTA_PX if robust else None

    rotation = init.rotation.copy()
    translation = init.translation.copy()

    def cost_of(r, t):
        res = _reprojection_residuals(cam, r, t, world, pixels, huber)
        return res, float(res @ res)

    residual, cost = cost_of(rotation, translation)
    if not np.isfinite(cost):
        raise RefineDivergedError("initial pose projects correspondences behind the camera")

    lam = LM_LAMBDA0
    n_pts = len(corrs)
    for _ in range(max_iters):
        jac = np.empty((residual.size, 6))
        h = 1e-6
        for idx in range(6):
            delta = np.zeros(6)
            delta[idx] = h
            r_p = _so3_exp(delta[:3]) @ rotation
            res_p = _reprojection_residuals(cam, r_p, translation + delta[3:], world, pixels, huber)
            delta[idx] = -h
            r_m = _so3_exp(delta[:3]) @ rotation
            res_m = _reprojection_residuals(cam, r_m, translation + delta[3:], world, pixels, huber)
            jac[:, idx] = (res_p - res_m) / (2.0 * h)

        jtj = jac.T @ jac
        jtr = jac.T @ residual
        diagonal = np.diag(np.maximum(np.diag(jtj), 1e-12))

        improved = False
        while lam <= LM_LAMBDA_CAP:
            try:
                step = np.linalg.solve(jtj + lam * diagonal, -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            r_new = _so3_exp(step[:3]) @ rotation
            t_new = translation + step[3:]
            res_new, cost_new = cost_of(r_new, t_new)
            if np.isfinite(cost_new) and cost_new < cost:
                rotation, translation = r_new, t_new
                delta_cost = cost - cost_new
                residual, cost = res_new, cost_new
                lam = max(lam / 10.0, 1e-12)
                improved = True
                if delta_cost < tol * max(cost, 1.0):
                    improved = False  # converged: stop the outer loop too
                break
            lam *= 10.0
        if not improved:
            break

    refined = RigidTransform(rotation, translation, init.from_frame, init.to_frame)
    rms = float(np.sqrt(cost / n_pts))
    return refined, rms
