"""Detection records and average-precision evaluation.

AP uses score-sorted greedy matching (each ground truth matched at most
once per frame) and the exact area under the interpolated precision
envelope, so hand-traceable cases come out exact. AP over the 0.50:0.05:
0.95 threshold range is the arithmetic mean of the per-threshold values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

logger = logging.getLogger(__name__)

AP_THRESHOLD_RANGE = tuple(0.50 + 0.05 * i for i in range(10))

# Table-style macro grouping: vehicles pool Bus/Car/Other.
DEFAULT_CLASS_GROUPS: dict[str, tuple[str, ...]] = {
    "Veh": ("Bus", "Car", "Other"),
    "Cyc": ("Cyclist",),
    "Ped": ("Pedestrian",),
}


class ObjectClass(Enum):
    BUS = "Bus"
    CAR = "Car"
    CYCLIST = "Cyclist"
    PEDESTRIAN = "Pedestrian"
    OTHER = "Other"


class MotionState(Enum):
    MOVING = "moving"
    STATIC = "static"


@dataclass(frozen=True)
class Box3D:
    """Oriented 3D box: geometric center, length/width/height, yaw about +z."""

    center: np.ndarray
    length: float
    width: float
    height: float
    yaw: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        c.flags.writeable = False
        object.__setattr__(self, "center", c)
        if min(self.length, self.width, self.height) <= 0:
            raise ValueError("box dimensions must be positive")

    def bev_corners(self) -> np.ndarray:
        """Footprint corners (4, 2) in the box frame's x-y plane."""
        dx, dy = self.length / 2.0, self.width / 2.0
        corners = np.array([[dx, dy], [dx, -dy], [-dx, -dy], [-dx, dy]])
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        rot = np.array([[c, -s], [s, c]])
        return corners @ rot.T + self.center[:2]


@dataclass(frozen=True)
class DetectionRecord:
    """One labeled or predicted object in one frame of one sensor."""

    frame_id: int
    sensor_id: str
    class_name: ObjectClass
    bbox2d: tuple[float, float, float, float] | None = None
    box3d: Box3D | None = None
    score: float = 1.0
    track_id: int | None = None
    motion_state: MotionState | None = None
    bbox_id: str = ""

    def __post_init__(self):
        if self.bbox2d is None and self.box3d is None:
            raise ValueError("record needs a 2D or a 3D box")
        if self.bbox2d is not None:
            u1, v1, u2, v2 = self.bbox2d
            if not (u1 < u2 and v1 < v2):
                raise ValueError(f"degenerate 2D box {self.bbox2d}")
            object.__setattr__(self, "bbox2d", (float(u1), float(v1), float(u2), float(v2)))
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")


def iou_2d(a, b) -> float:
    """Intersection over union of two axis-aligned [u1, v1, u2, v2] boxes."""
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


def _clip_polygon(poly: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Clip a polygon against the half-plane left of edge a->b."""
    out = []
    n = len(poly)
    for i in range(n):
        cur, nxt = poly[i], poly[(i + 1) % n]
        edge = b - a
        cur_in = np.cross(edge, cur - a) >= 0
        nxt_in = np.cross(edge, nxt - a) >= 0
        if cur_in:
            out.append(cur)
        if cur_in != nxt_in:
            d = nxt - cur
            denom = np.cross(edge, d)
            t = np.cross(edge, a - cur) / denom
            out.append(cur + t * d)
    return np.asarray(out) if out else np.empty((0, 2))


def _polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def bev_iou(a: Box3D, b: Box3D) -> float:
    """IoU of the rotated footprints in the x-y (bird's-eye) plane."""
    pa, pb = a.bev_corners(), b.bev_corners()
    clipped = pa
    nb = len(pb)
    for i in range(nb):
        clipped = _clip_polygon(clipped, pb[i], pb[(i + 1) % nb])
        if len(clipped) == 0:
            return 0.0
    inter = _polygon_area(clipped)
    union = a.length * a.width + b.length * b.width - inter
    return inter / union if union > 0 else 0.0


def iou_box3d(a: Box3D, b: Box3D) -> float:
    """Volumetric IoU: rotated footprint overlap times the z-interval overlap."""
    pa, pb = a.bev_corners(), b.bev_corners()
    clipped = pa
    nb = len(pb)
    for i in range(nb):
        clipped = _clip_polygon(clipped, pb[i], pb[(i + 1) % nb])
        if len(clipped) == 0:
            return 0.0
    bev_inter = _polygon_area(clipped)
    h_overlap = min(a.center[2] + a.height / 2, b.center[2] + b.height / 2) - max(
        a.center[2] - a.height / 2, b.center[2] - b.height / 2
    )
    if h_overlap <= 0:
        return 0.0
    inter = bev_inter * h_overlap
    union = a.length * a.width * a.height + b.length * b.width * b.height - inter
    return inter / union if union > 0 else 0.0


def _match_greedy(
    dets: list[DetectionRecord],
    gts: list[DetectionRecord],
    iou_threshold: float,
    iou_fn,
) -> np.ndarray:
    """Score-sorted greedy matching; returns a TP flag per detection in
    descending-score order (ties broken by input order)."""
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    gt_by_frame: dict[tuple[str, int], list[int]] = {}
    for j, g in enumerate(gts):
        gt_by_frame.setdefault((g.sensor_id, g.frame_id), []).append(j)
    matched: set[int] = set()
    tp = np.zeros(len(dets), dtype=bool)
    for rank, i in enumerate(order):
        det = dets[i]
        best_iou, best_j = 0.0, -1
        for j in gt_by_frame.get((det.sensor_id, det.frame_id), ()):
            if j in matched:
                continue
            iou = iou_fn(det, gts[j])
            if iou > best_iou:
                best_iou, best_j = iou, j
        if best_j >= 0 and best_iou >= iou_threshold:
            matched.add(best_j)
            tp[rank] = True
    return tp


def _iou_2d_records(a: DetectionRecord, b: DetectionRecord) -> float:
    return iou_2d(a.bbox2d, b.bbox2d)


def _area_under_envelope(recall: np.ndarray, precision: np.ndarray) -> float:
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    return float(np.sum((mrec[1:] - mrec[:-1]) * mpre[1:]))


def average_precision(
    dets: list[DetectionRecord],
    gts: list[DetectionRecord],
    iou_threshold: float,
    iou_fn=None,
) -> float:
    """AP of a single-class detection set against its ground truth.

    Depends on scores only through their ranking. An empty ground truth
    with nonempty detections scores 0 by convention (flagged in the log);
    empty on both sides is undefined and returns NaN.
    """
    if iou_fn is None:
        iou_fn = _iou_2d_records
    if not gts:
        if dets:
            logger.warning("AP evaluated with no ground truth; 0 by convention")
            return 0.0
        return float("nan")
    if not dets:
        return 0.0
    tp = _match_greedy(dets, gts, iou_threshold, iou_fn)
    cum_tp = np.cumsum(tp)
    cum_fp = np.cumsum(~tp)
    recall = cum_tp / len(gts)
    precision = cum_tp / (cum_tp + cum_fp)
    return _area_under_envelope(recall, precision)


def precision_recall(
    dets: list[DetectionRecord],
    gts: list[DetectionRecord],
    iou_threshold: float,
    iou_fn=None,
) -> tuple[float, float]:
    """Overall precision and recall at one IoU threshold."""
    if iou_fn is None:
        iou_fn = _iou_2d_records
    if not dets:
        return float("nan"), 0.0 if gts else float("nan")
    if not gts:
        return 0.0, float("nan")
    tp = int(_match_greedy(dets, gts, iou_threshold, iou_fn).sum())
    return tp / len(dets), tp / len(gts)


def ap_range(
    dets: list[DetectionRecord],
    gts: list[DetectionRecord],
    thresholds=AP_THRESHOLD_RANGE,
    iou_fn=None,
) -> float:
    """Mean AP over a threshold list (default 0.50:0.05:0.95)."""
    thresholds = list(thresholds)
    if not thresholds:
        raise ValueError("threshold list must be nonempty")
    aps = [average_precision(dets, gts, t, iou_fn) for t in thresholds]
    return sum(aps) / len(aps)


def class_grouped_ap(
    dets: list[DetectionRecord],
    gts: list[DetectionRecord],
    thresholds=AP_THRESHOLD_RANGE,
    groups: dict[str, tuple[str, ...]] | None = None,
    iou_fn=None,
) -> dict[str, float]:
    """AP-range per macro class group, each group pooled before matching."""
    if groups is None:
        groups = DEFAULT_CLASS_GROUPS
    out = {}
    for name, members in groups.items():
        classes = {ObjectClass(m) for m in members}
        d = [r for r in dets if r.class_name in classes]
        g = [r for r in gts if r.class_name in classes]
        out[name] = ap_range(d, g, thresholds, iou_fn)
    return out
