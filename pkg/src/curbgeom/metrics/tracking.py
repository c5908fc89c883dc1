"""CLEAR-MOT multi-object tracking evaluation.

Per-frame optimal assignment under a gate with persistent-match carryover:
a pair matched in the previous frame stays matched while it remains within
the gate, new pairs come from a Hungarian assignment, and an identity
switch is counted when a ground-truth track's match differs from its most
recent one. MOTA = 1 - (FN + FP + IDSW) / GT_total; MOTP is the mean
overlap of matched pairs (rotated bird's-eye IoU for 3D boxes, plain IoU
for 2D), so higher is better.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .detection import DetectionRecord, bev_iou, iou_2d

GATE_BEV_DISTANCE_M = 2.0
GATE_IOU_2D = 0.5
_INFEASIBLE = 1e9


@dataclass(frozen=True)
class MotSummary:
    mota: float
    motp: float
    fn: int
    fp: int
    idsw: int
    gt_total: int
    matches: int

    def as_dict(self) -> dict:
        return {
            "mota": self.mota,
            "motp": self.motp,
            "fn": self.fn,
            "fp": self.fp,
            "idsw": self.idsw,
            "gt_total": self.gt_total,
            "matches": self.matches,
        }


def _group_by_frame(records: list[DetectionRecord]) -> dict[int, list[DetectionRecord]]:
    out: dict[int, list[DetectionRecord]] = {}
    for r in records:
        if r.track_id is None:
            raise ValueError("tracking evaluation requires track ids on every record")
        out.setdefault(r.frame_id, []).append(r)
    return out


def clear_mot(
    tracks_pred: list[DetectionRecord],
    tracks_gt: list[DetectionRecord],
    gate_3d_m: float = GATE_BEV_DISTANCE_M,
    gate_2d_iou: float = GATE_IOU_2D,
    use_3d: bool | None = None,
) -> MotSummary:
    """Evaluate predicted tracks against ground-truth tracks.

    3D sequences gate on bird's-eye center distance (meters), 2D sequences
    on box IoU; the mode is inferred from the records unless forced.
    """
    if use_3d is None:
        pool = tracks_gt or tracks_pred
        use_3d = bool(pool) and all(r.box3d is not None for r in pool + tracks_pred)
    if use_3d:
        def gate_ok(g, p):
            return float(np.linalg.norm(g.box3d.center[:2] - p.box3d.center[:2])) <= gate_3d_m

        def cost(g, p):
            return float(np.linalg.norm(g.box3d.center[:2] - p.box3d.center[:2]))

        def overlap(g, p):
            return bev_iou(g.box3d, p.box3d)
    else:
        def gate_ok(g, p):
            return iou_2d(g.bbox2d, p.bbox2d) >= gate_2d_iou

        def cost(g, p):
            return 1.0 - iou_2d(g.bbox2d, p.bbox2d)

        def overlap(g, p):
            return iou_2d(g.bbox2d, p.bbox2d)

    gt_frames = _group_by_frame(tracks_gt)
    pred_frames = _group_by_frame(tracks_pred)

    fn = fp = idsw = gt_total = n_matches = 0
    overlap_sum = 0.0
    active: dict[int, int] = {}  # gt track -> pred track matched in the previous frame
    last_match: dict[int, int] = {}  # gt track -> most recent pred match ever

    for frame in sorted(set(gt_frames) | set(pred_frames)):
        gts = gt_frames.get(frame, [])
        preds = pred_frames.get(frame, [])
        gt_total += len(gts)
        gt_by_id = {g.track_id: g for g in gts}
        pred_by_id = {p.track_id: p for p in preds}

        pairs: list[tuple[int, int]] = []
        # Carry over still-valid matches before assigning anything new.
        for gid, pid in list(active.items()):
            if gid in gt_by_id and pid in pred_by_id and gate_ok(gt_by_id[gid], pred_by_id[pid]):
                pairs.append((gid, pid))

        taken_g = {g for g, _ in pairs}
        taken_p = {p for _, p in pairs}
        free_g = [g for g in gts if g.track_id not in taken_g]
        free_p = [p for p in preds if p.track_id not in taken_p]
        if free_g and free_p:
            costs = np.full((len(free_g), len(free_p)), _INFEASIBLE)
            for i, g in enumerate(free_g):
                for j, p in enumerate(free_p):
                    if gate_ok(g, p):
                        costs[i, j] = cost(g, p)
            rows, cols = linear_sum_assignment(costs)
            for i, j in zip(rows, cols):
                if costs[i, j] < _INFEASIBLE:
                    pairs.append((free_g[i].track_id, free_p[j].track_id))

        active = {}
        for gid, pid in pairs:
            if gid in last_match and last_match[gid] != pid:
                idsw += 1
            last_match[gid] = pid
            active[gid] = pid
            overlap_sum += overlap(gt_by_id[gid], pred_by_id[pid])
            n_matches += 1
        fn += len(gts) - len(pairs)
        fp += len(preds) - len(pairs)

    mota = 1.0 - (fn + fp + idsw) / gt_total if gt_total > 0 else float("nan")
    motp = overlap_sum / n_matches if n_matches > 0 else float("nan")
    return MotSummary(mota, motp, fn, fp, idsw, gt_total, n_matches)
