"""Synthetic pinhole-scene oracle.

Builds cameras over piecewise-planar ground, plants targets on the surface
and renders their exact contact pixels, ground clouds, control points and
survey trajectories. Every estimator and calibration claim in the package
is testable against these scenes without real data.

Scene geometry lives in the road frame: origin at the pole's ground
contact, y' along the principal ground normal (pointing away from the
camera side), z' down-road. The camera sits at (0, -height, 0) with
camera-to-road rotation built from its pitch and roll. The ground is a
chain of planes: altitude is piecewise linear in z', each break switching
to a new slope (meters of rise per meter of run).

All randomness flows from the scene seed through numpy's PCG64; per-item
sub-seeds keep generation order-independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calib import PointCloud
from .camera import CameraModel, PixelPoint, horizon_row, project_batch
from .errors import InsufficientDataError
from .estimators import ContactPoint, GroundPlane, P3DConfig
from .frames import FrameId, FrameKind, RigidTransform, rotation_from_pitch_roll
from .metrics import ObjectClass, TrajectorySample

PRNG_ALGORITHM = "numpy.random.PCG64"
DEFAULT_HEIGHT_RANGE = (2.5, 6.5)  # pole mount heights, meters
DEFAULT_TARGET_RANGE = (15.0, 100.0)
DEFAULT_LATERAL_FRACTION = 0.25

DEFAULT_CAMERA = CameraModel(fx=1700.0, fy=1700.0, cx=960.0, cy=540.0, width=1920, height=1080)

# Rough metric extents (width, height) used to dress contact points as boxes.
CLASS_EXTENTS = {
    ObjectClass.BUS: (2.5, 3.2),
    ObjectClass.CAR: (1.8, 1.5),
    ObjectClass.CYCLIST: (0.8, 1.7),
    ObjectClass.PEDESTRIAN: (0.5, 1.7),
    ObjectClass.OTHER: (1.2, 1.6),
}

OMIT_BEHIND_CAMERA = "behind_camera"
OMIT_OUT_OF_BOUNDS = "out_of_bounds"
OMIT_AT_OR_ABOVE_HORIZON = "at_or_above_horizon"


@dataclass(frozen=True)
class NoiseSpec:
    pixel_sigma: float = 0.0
    control_point_sigma: float = 0.0


@dataclass(frozen=True)
class SceneTarget:
    ground_xz: tuple[float, float]  # (x', z') road coordinates, meters
    class_name: ObjectClass


@dataclass(frozen=True)
class SyntheticScene:
    camera: CameraModel
    height: float
    alpha: float
    gamma: float
    plane_breaks: tuple[tuple[float, float], ...]  # (z' start, new slope)
    targets: tuple[SceneTarget, ...]
    noise: NoiseSpec
    seed: int
    sensor_id: str = "synth0"

    def __post_init__(self):
        if self.height <= 0:
            raise ValueError("camera height must be positive")
        starts = [b[0] for b in self.plane_breaks]
        if any(s <= 0 for s in starts) or sorted(starts) != starts:
            raise ValueError("plane breaks must be sorted and start beyond the pole")

    # -- frame plumbing ------------------------------------------------

    def cam_to_road(self) -> RigidTransform:
        return RigidTransform(
            rotation_from_pitch_roll(self.alpha, self.gamma),
            np.array([0.0, -self.height, 0.0]),
            FrameId(FrameKind.CAMERA_OPTICAL, self.sensor_id),
            FrameId(FrameKind.ROAD, self.sensor_id),
        )

    def p3d_config(self) -> P3DConfig:
        return P3DConfig(self.camera, self.height, self.alpha, self.gamma)

    # -- ground surface ------------------------------------------------

    def _segments(self) -> list[tuple[float, float, float]]:
        """(z_start, slope, altitude at z_start) per segment."""
        segs = [(0.0, 0.0, 0.0)]
        alt = 0.0
        prev_z, prev_s = 0.0, 0.0
        for z_b, slope in self.plane_breaks:
            alt += prev_s * (z_b - prev_z)
            segs.append((z_b, slope, alt))
            prev_z, prev_s = z_b, slope
        return segs

    def altitude(self, z_road) -> np.ndarray:
        """Ground altitude (meters up from the principal plane) at z'."""
        z = np.atleast_1d(np.asarray(z_road, dtype=np.float64))
        out = np.zeros_like(z)
        for z_start, slope, alt0 in self._segments():
            sel = z >= z_start
            out[sel] = alt0 + slope * (z[sel] - z_start)
        return out

    def ground_planes(self) -> tuple[GroundPlane, ...]:
        """Each ground segment as a camera-frame plane (first = principal)."""
        rot = rotation_from_pitch_roll(self.alpha, self.gamma)
        t = np.array([0.0, -self.height, 0.0])
        planes = []
        frame = FrameId(FrameKind.CAMERA_OPTICAL, self.sensor_id)
        for z_start, slope, alt0 in self._segments():
            n_road = np.array([0.0, 1.0, slope])
            c = alt0 - slope * z_start
            planes.append(GroundPlane(rot.T @ n_road, float(n_road @ t) + c, frame))
        return tuple(planes)

    def surface_points_road(self, x_road, z_road) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x_road, dtype=np.float64))
        z = np.atleast_1d(np.asarray(z_road, dtype=np.float64))
        return np.column_stack((x, -self.altitude(z), z))

    def to_camera(self, points_road) -> np.ndarray:
        rot = rotation_from_pitch_roll(self.alpha, self.gamma)
        t = np.array([0.0, -self.height, 0.0])
        return (np.asarray(points_road, dtype=np.float64) - t) @ rot


@dataclass(frozen=True)
class RenderedContact:
    contact: ContactPoint
    exact_pixel: PixelPoint
    gt_point_cam: np.ndarray
    gt_distance: float
    class_name: ObjectClass
    target_index: int


@dataclass(frozen=True)
class RenderResult:
    contacts: tuple[RenderedContact, ...] = ()
    omitted: tuple[tuple[int, str], ...] = field(default_factory=tuple)


def make_scene(
    height: float | None,
    alpha: float,
    gamma: float = 0.0,
    plane_breaks=(),
    n_targets: int = 30,
    seed: int = 0,
    camera: CameraModel = DEFAULT_CAMERA,
    target_range: tuple[float, float] = DEFAULT_TARGET_RANGE,
    lateral_fraction: float = DEFAULT_LATERAL_FRACTION,
    noise: NoiseSpec = NoiseSpec(),
    sensor_id: str = "synth0",
) -> SyntheticScene:
    """Deterministically build a scene from a seed.

    A ``None`` height is drawn uniformly from the pole-mount range
    [2.5, 6.5] m. Targets get uniform down-road positions over
    ``target_range`` and lateral offsets within ``lateral_fraction`` of
    their distance (keeping them inside a realistic field of view).
    """
    lo, hi = target_range
    if not (0 < lo < hi):
        raise ValueError(f"invalid target range ({lo}, {hi})")
    rng = np.random.default_rng([seed, 0xC0DE])
    if height is None:
        height = float(rng.uniform(*DEFAULT_HEIGHT_RANGE))
    z = rng.uniform(lo, hi, size=n_targets)
    x = rng.uniform(-lateral_fraction, lateral_fraction, size=n_targets) * z
    classes = rng.choice([c.value for c in ObjectClass], size=n_targets)
    targets = tuple(
        SceneTarget((float(xi), float(zi)), ObjectClass(ci))
        for xi, zi, ci in zip(x, z, classes)
    )
    return SyntheticScene(
        camera=camera,
        height=height,
        alpha=alpha,
        gamma=gamma,
        plane_breaks=tuple((float(a), float(b)) for a, b in plane_breaks),
        targets=targets,
        noise=noise,
        seed=seed,
        sensor_id=sensor_id,
    )


def render_contacts(scene: SyntheticScene) -> RenderResult:
    """Exact contact pixels (plus configured noise) for visible targets.

    A target is visible when its distorted projection lands inside the
    image and its ideal-pinhole row is strictly below the horizon row of
    the scene pitch; everything else is omitted with a reason. Ground
    truth carries the camera-frame point and the distance to the camera's
    ground foot point (the road-frame origin).
    """
    cam = scene.camera
    if not scene.targets:
        return RenderResult()
    xz = np.array([t.ground_xz for t in scene.targets])
    pts_road = scene.surface_points_road(xz[:, 0], xz[:, 1])
    pts_cam = scene.to_camera(pts_road)
    v_h = horizon_row(cam, scene.alpha)

    pix_ideal = project_batch(cam, pts_cam, apply_distortion=False)
    pix_exact = project_batch(cam, pts_cam, apply_distortion=True)
    gt_dist = np.linalg.norm(pts_road, axis=1)

    contacts = []
    omitted = []
    for i, target in enumerate(scene.targets):
        if pts_cam[i, 2] <= 0:
            omitted.append((i, OMIT_BEHIND_CAMERA))
            continue
        if pix_ideal[i, 1] <= v_h:
            omitted.append((i, OMIT_AT_OR_ABOVE_HORIZON))
            continue
        u, v = pix_exact[i]
        if not (0 <= u < cam.width and 0 <= v < cam.height):
            omitted.append((i, OMIT_OUT_OF_BOUNDS))
            continue
        if scene.noise.pixel_sigma > 0:
            rng = np.random.default_rng([scene.seed, 1, i])
            du, dv = rng.normal(0.0, scene.noise.pixel_sigma, size=2)
            u, v = u + du, v + dv
        contacts.append(
            RenderedContact(
                ContactPoint(PixelPoint(float(u), float(v)), f"t{i:04d}"),
                PixelPoint(float(pix_exact[i, 0]), float(pix_exact[i, 1])),
                pts_cam[i],
                float(gt_dist[i]),
                target.class_name,
                i,
            )
        )
    return RenderResult(tuple(contacts), tuple(omitted))


def contact_bbox(rc: RenderedContact, cam: CameraModel) -> tuple[float, float, float, float]:
    """Dress a rendered contact as a plausible 2D box whose lower-edge
    midpoint is exactly the contact pixel."""
    w_m, h_m = CLASS_EXTENTS[rc.class_name]
    z = float(rc.gt_point_cam[2])
    w_px = max(w_m * cam.fx / z, 2.0)
    h_px = max(h_m * cam.fy / z, 2.0)
    u, v = rc.contact.pixel
    return (u - w_px / 2.0, v - h_px, u + w_px / 2.0, v)


def render_ground_cloud(
    scene: SyntheticScene,
    n_points: int,
    noise_sigma: float = 0.0,
    outlier_rate: float = 0.0,
    area: tuple[float, float, float, float] = (-15.0, 15.0, 2.0, 60.0),
) -> PointCloud:
    """Ground returns in a synthetic LiDAR-ego frame sharing the pole.

    The LiDAR sits at the camera mount height with x forward (down-road),
    y left and z up, so level ground shows up as the plane z = -height.
    Points get Gaussian noise along the local surface normal; an
    ``outlier_rate`` fraction is replaced by uniform box clutter.
    """
    if n_points < 3:
        raise InsufficientDataError("a useful cloud needs at least 3 points")
    rng = np.random.default_rng([scene.seed, 2])
    x_lo, x_hi, z_lo, z_hi = area
    x_road = rng.uniform(x_lo, x_hi, size=n_points)
    z_road = rng.uniform(z_lo, z_hi, size=n_points)
    pts_road = scene.surface_points_road(x_road, z_road)

    if noise_sigma > 0:
        slopes = np.zeros(n_points)
        for z_start, slope, _ in scene._segments():
            slopes[z_road >= z_start] = slope
        normals = np.column_stack(
            (np.zeros(n_points), np.ones(n_points), slopes)
        )
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        pts_road += normals * rng.normal(0.0, noise_sigma, size=(n_points, 1))

    # road -> lidar-ego: x_l = z', y_l = -x', z_l = -(y' + height)
    origin = np.array([0.0, -scene.height, 0.0])
    d = pts_road - origin
    pts = np.column_stack((d[:, 2], -d[:, 0], -d[:, 1]))

    if outlier_rate > 0:
        n_out = int(round(outlier_rate * n_points))
        if n_out:
            idx = rng.choice(n_points, size=n_out, replace=False)
            lo = pts.min(axis=0) - 1.0
            hi = pts.max(axis=0) + 1.0
            hi[2] = -scene.height + 8.0  # clutter at random heights above ground
            pts[idx] = rng.uniform(lo, hi, size=(n_out, 3))
    return PointCloud(pts)


def render_control_points(
    scene: SyntheticScene,
    z_marks=(12.0, 18.0, 25.0, 33.0, 42.0, 50.0),
    x_marks=(-6.0, -2.0, 2.0, 6.0),
) -> list[tuple[PixelPoint, tuple[float, float]]]:
    """Surveyed pixel/ground pairs for homography fitting.

    Markers sit on the true ground surface at the given road coordinates;
    their observed pixels carry the scene's control-point noise. The
    ground coordinate is the surveyed horizontal (x', z') position, so on
    non-flat ground the pairs are intentionally not homography-consistent.
    Only markers visible in the image are returned.
    """
    cam = scene.camera
    grid = [(x, z) for z in z_marks for x in x_marks]
    pts_road = scene.surface_points_road(
        np.array([g[0] for g in grid]), np.array([g[1] for g in grid])
    )
    pix = project_batch(cam, scene.to_camera(pts_road), apply_distortion=True)
    rng = np.random.default_rng([scene.seed, 3])
    noise = rng.normal(0.0, scene.noise.control_point_sigma, size=pix.shape) \
        if scene.noise.control_point_sigma > 0 else np.zeros_like(pix)
    out = []
    for (gx, gz), (u, v), (du, dv) in zip(grid, pix, noise):
        if np.isnan(u) or not (0 <= u < cam.width and 0 <= v < cam.height):
            continue
        out.append((PixelPoint(float(u + du), float(v + dv)), (gx, gz)))
    return out


def render_trajectory(
    scene: SyntheticScene,
    z_start: float = 100.0,
    z_end: float = 3.0,
    step: float = 1.0,
) -> list[TrajectorySample]:
    """Survey-vehicle track driving down-road toward the pole.

    Emitted in a map frame aligned with the road: x = z' (east), y = -x'
    (north), z = altitude. Timestamps tick at 0.5 s per sample.
    """
    z_vals = np.arange(z_start, z_end, -step)
    alts = scene.altitude(z_vals)
    return [
        TrajectorySample(0.5 * i, float(z), 0.0, float(a))
        for i, (z, a) in enumerate(zip(z_vals, alts))
    ]


# -- flatness presets ---------------------------------------------------

PRESET_CAMERA = CameraModel(
    fx=1700.0, fy=1700.0, cx=960.0, cy=540.0,
    k1=-0.08, k2=0.01, p1=0.0005, p2=-0.0003, k3=0.0,
    width=1920, height=1080,
)

PRESET_NOISE = NoiseSpec(pixel_sigma=0.5, control_point_sigma=1.0)

_PRESETS = {
    "even": dict(height=6.0, alpha=-0.13, gamma=0.004, plane_breaks=()),
    "partially-even": dict(
        height=5.0, alpha=-0.14, gamma=0.006, plane_breaks=((45.0, 0.035),)
    ),
    "uneven": dict(
        height=4.5,
        alpha=-0.15,
        gamma=0.008,
        plane_breaks=((25.0, 0.05), (50.0, -0.04), (75.0, 0.06)),
    ),
}

PRESET_NAMES = tuple(_PRESETS)


def preset_scene(name: str, seed: int = 0, n_targets: int = 40) -> SyntheticScene:
    """One of the three flatness presets (even / partially-even / uneven)."""
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    params = _PRESETS[name]
    return make_scene(
        height=params["height"],
        alpha=params["alpha"],
        gamma=params["gamma"],
        plane_breaks=params["plane_breaks"],
        n_targets=n_targets,
        seed=seed,
        camera=PRESET_CAMERA,
        noise=PRESET_NOISE,
        sensor_id=f"{name}-cam",
    )
