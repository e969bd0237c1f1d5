# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot kernels.

Mirrors kernels/_py.py; the two backends must agree to ~1e-12 on random
inputs (tested in tests/test_kernels.py).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fmax, sqrt

cnp.import_array()

REGIME_BI = 0
REGIME_AGENT = 1
REGIME_EGO = 2
REGIME_AWAY = 3


def agent_risk_batch(rel, v_e, v_i, mu, omega, double kappa, double lam,
                     double kc, double eps):
    """Per-row risk for K (ego, agent) pairs; see kernels/_py.py."""
    cdef double[:, ::1] rel_v = np.ascontiguousarray(rel, dtype=np.float64)
    cdef double[:, ::1] ve_v = np.ascontiguousarray(v_e, dtype=np.float64)
    cdef double[:, ::1] vi_v = np.ascontiguousarray(v_i, dtype=np.float64)
    cdef double[::1] mu_v = np.ascontiguousarray(mu, dtype=np.float64)
    cdef double[::1] om_v = np.ascontiguousarray(omega, dtype=np.float64)

    cdef Py_ssize_t k = rel_v.shape[0]
    risk_a = np.empty(k, dtype=np.float64)
    regime_a = np.empty(k, dtype=np.int64)
    dist_a = np.empty(k, dtype=np.float64)
    s_a = np.empty(k, dtype=np.float64)
    alpha_a = np.empty(k, dtype=np.float64)
    beta_a = np.empty(k, dtype=np.float64)
    cdef double[::1] risk_v = risk_a
    cdef cnp.int64_t[::1] regime_v = regime_a
    cdef double[::1] dist_v = dist_a
    cdef double[::1] s_v = s_a
    cdef double[::1] alpha_v = alpha_a
    cdef double[::1] beta_v = beta_a

    cdef Py_ssize_t i
    cdef double rx, ry, dist, inv, rhx, rhy, d_ei, d_ie
    cdef double vrx, vry, s, alpha, cross, sin2, beta
    cdef int regime
    for i in range(k):
        rx = rel_v[i, 0]
        ry = rel_v[i, 1]
        dist = sqrt(rx * rx + ry * ry)
        inv = 1.0 / (dist + eps)
        rhx = rx * inv
        rhy = ry * inv

        d_ei = ve_v[i, 0] * rx + ve_v[i, 1] * ry
        d_ie = -(vi_v[i, 0] * rx + vi_v[i, 1] * ry)
        if d_ei > 0.0 and d_ie > 0.0:
            regime = REGIME_BI
        elif d_ei <= 0.0 and d_ie > 0.0:
            regime = REGIME_AGENT
        elif d_ei > 0.0 and d_ie <= 0.0:
            regime = REGIME_EGO
        else:
            regime = REGIME_AWAY

        vrx = ve_v[i, 0] - vi_v[i, 0]
        vry = ve_v[i, 1] - vi_v[i, 1]
        s = fmax(0.0, vrx * rhx + vry * rhy)
        alpha = exp(kappa * s)

        cross = vrx * rhy - vry * rhx
        sin2 = cross * cross / (vrx * vrx + vry * vry + eps)
        beta = exp(-lam * sin2)

        risk_v[i] = kc * om_v[regime] * mu_v[i] * alpha * beta * inv
        regime_v[i] = regime
        dist_v[i] = dist
        s_v[i] = s
        alpha_v[i] = alpha
        beta_v[i] = beta

    return risk_a, regime_a, dist_a, s_a, alpha_a, beta_a


def splat_max(double[:, ::1] canvas, us, vs, amps,
              double sigma_x, double sigma_y):
    """Max-composite Gaussian blobs onto a (H, W) canvas, in place."""
    cdef double[::1] us_v = np.ascontiguousarray(us, dtype=np.float64)
    cdef double[::1] vs_v = np.ascontiguousarray(vs, dtype=np.float64)
    cdef double[::1] am_v = np.ascontiguousarray(amps, dtype=np.float64)

    cdef Py_ssize_t h = canvas.shape[0]
    cdef Py_ssize_t w = canvas.shape[1]
    cdef Py_ssize_t n = us_v.shape[0]
    cdef double tx = 2.0 * sigma_x * sigma_x
    cdef double ty = 2.0 * sigma_y * sigma_y
    cdef double[::1] ex = np.empty(w, dtype=np.float64)
    cdef Py_ssize_t i, y, x
    cdef double u, v, a, dy, dx, gy, val
    for i in range(n):
        a = am_v[i]
        if a == 0.0:
            continue
        u = us_v[i]
        v = vs_v[i]
        # separable blob: one exp per row/column instead of per pixel
        for x in range(w):
            dx = x - u
            ex[x] = exp(-(dx * dx) / tx)
        for y in range(h):
            dy = y - v
            gy = a * exp(-(dy * dy) / ty)
            if gy == 0.0:
                continue
            for x in range(w):
                val = gy * ex[x]
                if val > canvas[y, x]:
                    canvas[y, x] = val
    return np.asarray(canvas)
