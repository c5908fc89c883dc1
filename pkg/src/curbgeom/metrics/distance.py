"""Range-binned distance-error profiles for estimator comparisons."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DistanceBin:
    range_lo: float
    range_hi: float
    mean_abs_error: float  # NaN for an empty bin
    count: int


@dataclass(frozen=True)
class DistanceErrorProfile:
    bins: tuple[DistanceBin, ...]
    method_name: str = ""
    scenario: str = ""

    def total_count(self) -> int:
        return sum(b.count for b in self.bins)

    def overall_mae(self) -> float:
        total = self.total_count()
        if total == 0:
            return float("nan")
        return (
            sum(b.mean_abs_error * b.count for b in self.bins if b.count > 0) / total
        )


def distance_error_profile(
    pairs: list[tuple[float, float]],
    bin_width: float,
    method_name: str = "",
    scenario: str = "",
) -> DistanceErrorProfile:
    """Mean absolute error of predicted vs. true distance, binned by truth.

    Bins are [0, w), [w, 2w), ...; empty bins keep count 0 and a NaN error.
    Ground-truth distances must be positive.
    """
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    for gt, _ in pairs:
        if gt <= 0:
            raise ValueError(f"ground-truth distance {gt} is not positive")
    if not pairs:
        return DistanceErrorProfile((), method_name, scenario)
    gts = np.array([p[0] for p in pairs])
    errs = np.abs(np.array([p[1] for p in pairs]) - gts)
    n_bins = int(math.floor(gts.max() / bin_width)) + 1
    idx = np.floor(gts / bin_width).astype(int)
    bins = []
    for i in range(n_bins):
        sel = idx == i
        count = int(sel.sum())
        mae = float(errs[sel].mean()) if count else float("nan")
        bins.append(DistanceBin(i * bin_width, (i + 1) * bin_width, mae, count))
    return DistanceErrorProfile(tuple(bins), method_name, scenario)
