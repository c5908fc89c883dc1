"""Ground-flatness profiling from survey-vehicle trajectories.

Altitude against arc length is fitted with a line; the goodness of fit
clusters a camera's ground into even, partially-even and uneven classes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import InsufficientDataError

R2_EVEN = 0.9
R2_PARTIAL = 0.6


class FlatnessLabel(Enum):
    EVEN = "Even"
    PARTIALLY_EVEN = "PartiallyEven"
    UNEVEN = "Uneven"


@dataclass(frozen=True)
class TrajectorySample:
    """Timestamped position of the survey vehicle, map frame, meters."""

    t: float
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class FlatnessProfile:
    samples: tuple[tuple[float, float], ...]  # (arc length, altitude)
    r_squared: float
    label: FlatnessLabel
    slope: float
    intercept: float
    zero_variance: bool = False


def flatness_profile(
    samples: list[TrajectorySample],
    even_threshold: float = R2_EVEN,
    partial_threshold: float = R2_PARTIAL,
) -> FlatnessProfile:
    """Linear fit of altitude vs. horizontal arc length, labeled by R^2.

    Arc length accumulates the horizontal (x, y) displacement between
    consecutive samples. Constant altitude has zero variance; its R^2 is
    defined as 1 and flagged. Requires at least 3 samples spanning more
    than 1 meter.
    """
    if len(samples) < 3:
        raise InsufficientDataError("flatness profile needs at least 3 samples")
    xy = np.array([[p.x, p.y] for p in samples])
    z = np.array([p.z for p in samples])
    steps = np.linalg.norm(np.diff(xy, axis=0), axis=1)
    s = np.concatenate(([0.0], np.cumsum(steps)))
    if s[-1] <= 1.0:
        raise InsufficientDataError(f"trajectory spans only {s[-1]:.3f} m; need > 1 m")

    design = np.column_stack((s, np.ones_like(s)))
    (slope, intercept), *_ = np.linalg.lstsq(design, z, rcond=None)
    ss_res = float(np.sum((z - (slope * s + intercept)) ** 2))
    ss_tot = float(np.sum((z - z.mean()) ** 2))
    zero_variance = ss_tot < 1e-24
    r2 = 1.0 if zero_variance else 1.0 - ss_res / ss_tot
    r2 = min(max(r2, 0.0), 1.0)

    if r2 >= even_threshold:
        label = FlatnessLabel.EVEN
    elif r2 >= partial_threshold:
        label = FlatnessLabel.PARTIALLY_EVEN
    else:
        label = FlatnessLabel.UNEVEN
    return FlatnessProfile(
        tuple(zip(s.tolist(), z.tolist())), r2, label, float(slope), float(intercept), zero_variance
    )
