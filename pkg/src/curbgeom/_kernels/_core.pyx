# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the per-point hot loops.

Same contracts as ``_numpy``: contiguous float64 in, float64 out, NaN for
per-item failures. Kept numerically identical op-for-op so the two backends
agree to the last ulp wherever libm does.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, fabs, sin

cnp.import_array()

BACKEND_NAME = "native"


def distort_normalized(object x_in, object y_in, double k1, double k2,
                       double p1, double p2, double k3):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.ascontiguousarray(x_in, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.ascontiguousarray(y_in, dtype=np.float64).ravel()
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xd = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yd = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i
    cdef double xi, yi, r2, radial
    for i in range(n):
        xi = x[i]
        yi = y[i]
        r2 = xi * xi + yi * yi
        radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
        xd[i] = xi * radial + 2.0 * p1 * xi * yi + p2 * (r2 + 2.0 * xi * xi)
        yd[i] = yi * radial + p1 * (r2 + 2.0 * yi * yi) + 2.0 * p2 * xi * yi
    return xd, yd


def undistort_normalized(object xd_in, object yd_in, double k1, double k2,
                         double p1, double p2, double k3, int max_iters,
                         double tol):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xd = np.ascontiguousarray(xd_in, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yd = np.ascontiguousarray(yd_in, dtype=np.float64).ravel()
    cdef Py_ssize_t n = xd.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xo = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yo = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] conv = np.zeros(n, dtype=np.uint8)
    cdef Py_ssize_t i
    cdef int it
    cdef double x, y, xn, yn, r2, radial, tx, ty, step
    for i in range(n):
        x = xd[i]
        y = yd[i]
        for it in range(max_iters):
            r2 = x * x + y * y
            radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
            tx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
            ty = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
            xn = (xd[i] - tx) / radial
            yn = (yd[i] - ty) / radial
            step = fabs(xn - x)
            if fabs(yn - y) > step:
                step = fabs(yn - y)
            x = xn
            y = yn
            if step < tol:
                conv[i] = 1
                break
        xo[i] = x
        yo[i] = y
    return xo, yo, conv.view(np.bool_)


def ground_depth(object v_in, double fy, double cy, double height,
                 double alpha, double eps):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v = np.ascontiguousarray(v_in, dtype=np.float64).ravel()
    cdef Py_ssize_t n = v.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.empty(n, dtype=np.float64)
    cdef double sa = sin(alpha)
    cdef double ca = cos(alpha)
    cdef double nan = float("nan")
    cdef Py_ssize_t i
    cdef double denom
    for i in range(n):
        denom = -fy * sa + (v[i] - cy) * ca
        z[i] = height * fy / denom if denom > eps else nan
    return z


def backproject(object u_in, object v_in, object z_in, double fx, double fy,
                double cx, double cy):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.ascontiguousarray(u_in, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v = np.ascontiguousarray(v_in, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.ascontiguousarray(z_in, dtype=np.float64).ravel()
    cdef Py_ssize_t n = u.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i
    for i in range(n):
        x[i] = (u[i] - cx) * z[i] / fx
        y[i] = (v[i] - cy) * z[i] / fy
    return x, y


def ray_ground_intersect(object u_in, object v_in, double fx, double fy,
                         double cx, double cy, double nx, double ny,
                         double nz, double d, double eps):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.ascontiguousarray(u_in, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v = np.ascontiguousarray(v_in, dtype=np.float64).ravel()
    cdef Py_ssize_t n = u.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.empty(n, dtype=np.float64)
    cdef double nan = float("nan")
    cdef Py_ssize_t i
    cdef double rx, ry, denom, t
    for i in range(n):
        rx = (u[i] - cx) / fx
        ry = (v[i] - cy) / fy
        denom = nx * rx + ny * ry + nz
        if fabs(denom) > eps:
            t = -d / denom
            if t > 0.0:
                x[i] = t * rx
                y[i] = t * ry
                z[i] = t
                continue
        x[i] = nan
        y[i] = nan
        z[i] = nan
    return x, y, z
