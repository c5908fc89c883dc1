"""Kernel backend selection.

The compiled extension is preferred when present; the NumPy implementation
is the fallback. ``CURB_BACKEND=python`` forces the fallback, and
``CURB_BACKEND=native`` makes a missing extension a hard error instead of a
silent downgrade.
"""

from __future__ import annotations

import os

from . import _numpy as _py

_requested = os.environ.get("CURB_BACKEND", "").strip().lower()

if _requested == "python":
    _impl = _py
elif _requested == "native":
    from . import _core as _impl  # noqa: F401
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _py

distort_normalized = _impl.distort_normalized
undistort_normalized = _impl.undistort_normalized
ground_depth = _impl.ground_depth
backproject = _impl.backproject
ray_ground_intersect = _impl.ray_ground_intersect


def backend() -> str:
    """Name of the active kernel backend: "native" or "python"."""
    return _impl.BACKEND_NAME
