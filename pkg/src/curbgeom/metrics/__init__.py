"""Evaluation metrics: detection AP, CLEAR-MOT, masks, distance, flatness."""

from .detection import (
    AP_THRESHOLD_RANGE,
    DEFAULT_CLASS_GROUPS,
    Box3D,
    DetectionRecord,
    MotionState,
    ObjectClass,
    ap_range,
    average_precision,
    bev_iou,
    class_grouped_ap,
    iou_2d,
    iou_box3d,
    precision_recall,
)
from .distance import DistanceBin, DistanceErrorProfile, distance_error_profile
from .flatness import FlatnessLabel, FlatnessProfile, TrajectorySample, flatness_profile
from .masks import MaskScores, mask_prf
from .tracking import MotSummary, clear_mot

__all__ = [
    "AP_THRESHOLD_RANGE",
    "DEFAULT_CLASS_GROUPS",
    "Box3D",
    "DetectionRecord",
    "DistanceBin",
    "DistanceErrorProfile",
    "FlatnessLabel",
    "FlatnessProfile",
    "MaskScores",
    "MotSummary",
    "MotionState",
    "ObjectClass",
    "TrajectorySample",
    "ap_range",
    "average_precision",
    "bev_iou",
    "class_grouped_ap",
    "clear_mot",
    "distance_error_profile",
    "flatness_profile",
    "iou_2d",
    "iou_box3d",
    "mask_prf",
    "precision_recall",
]
