"""Pure NumPy kernel implementations.

Reference backend for the per-point inner loops. The compiled extension in
``_core.pyx`` mirrors these semantics exactly; both operate on contiguous
float64 arrays and signal per-item failures with NaN rather than raising.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def distort_normalized(x, y, k1, k2, p1, p2, k3):
    """Apply radial + tangential distortion to normalized image coordinates."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r2 = x * x + y * y
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
    yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
    return xd, yd


def undistort_normalized(xd, yd, k1, k2, p1, p2, k3, max_iters, tol):
    """Invert the distortion map by fixed-point iteration.

    Returns (x, y, converged) where converged is a bool array; entries that
    did not reach ``tol`` within ``max_iters`` keep their last iterate.
    """
    xd = np.asarray(xd, dtype=np.float64)
    yd = np.asarray(yd, dtype=np.float64)
    x = xd.copy()
    y = yd.copy()
    converged = np.zeros(x.shape, dtype=bool)
    for _ in range(max_iters):
        r2 = x * x + y * y
        radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
        tx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
        ty = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
        xn = (xd - tx) / radial
        yn = (yd - ty) / radial
        step = np.maximum(np.abs(xn - x), np.abs(yn - y))
        x, y = xn, yn
        converged |= step < tol
        if converged.all():
            break
    return x, y, converged


def ground_depth(v, fy, cy, height, alpha, eps):
    """Depth along the camera axis of the ground point seen at image row v.

    NaN where the row is at or above the horizon (denominator <= eps).
    """
    v = np.asarray(v, dtype=np.float64)
    denom = -fy * np.sin(alpha) + (v - cy) * np.cos(alpha)
    z = np.where(denom > eps, height * fy / np.where(denom > eps, denom, 1.0), np.nan)
    return z


def backproject(u, v, z, fx, fy, cx, cy):
    """Lift pixels with known depth to camera-frame x, y."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    x = (u - cx) * z / fx
    y = (v - cy) * z / fy
    return x, y


def ray_ground_intersect(u, v, fx, fy, cx, cy, nx, ny, nz, d, eps):
    """Intersect pixel rays with the plane n.Q + d = 0 (camera frame).

    Returns (x, y, z); rows are NaN when the ray is parallel to the plane
    or the intersection is not in front of the camera.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    rx = (u - cx) / fx
    ry = (v - cy) / fy
    denom = nx * rx + ny * ry + nz
    ok = np.abs(denom) > eps
    t = np.where(ok, -d / np.where(ok, denom, 1.0), np.nan)
    ok &= t > 0.0
    t = np.where(ok, t, np.nan)
    return t * rx, t * ry, t
