"""Binary mask overlap scores for moving-instance segmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MaskScores:
    iou: float
    precision: float
    recall: float
    f_measure: float
    all_empty: bool = False

    def as_dict(self) -> dict:
        return {
            "iou": self.iou,
            "precision": self.precision,
            "recall": self.recall,
            "f_measure": self.f_measure,
            "all_empty": self.all_empty,
        }


def mask_prf(pred_mask, gt_mask) -> MaskScores:
    """Set-overlap precision, recall, F-measure and IoU of binary rasters.

    Two empty masks score 1.0 across the board, flagged via ``all_empty``.
    A one-sided empty mask scores precision (or recall) 1.0 on the empty
    side and 0 elsewhere.
    """
    pred = np.asarray(pred_mask).astype(bool)
    gt = np.asarray(gt_mask).astype(bool)
    if pred.shape != gt.shape:
        raise ValueError(f"mask dimensions differ: {pred.shape} vs {gt.shape}")
    n_pred = int(pred.sum())
    n_gt = int(gt.sum())
    if n_pred == 0 and n_gt == 0:
        return MaskScores(1.0, 1.0, 1.0, 1.0, all_empty=True)
    inter = int((pred & gt).sum())
    union = n_pred + n_gt - inter
    precision = inter / n_pred if n_pred else 1.0
    recall = inter / n_gt if n_gt else 1.0
    f = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return MaskScores(inter / union, precision, recall, f)
