"""Pure-numpy implementations of the hot kernels.

Used as the import-time fallback when the compiled extension is
unavailable (or when RISKGEN_PURE_PYTHON=1). Both backends implement the
same contracts and agree to ~1e-12; see tests/test_kernels.py and
benchmarks/bench_kernels.py.
"""

import numpy as np

# interaction regime codes, shared with the compiled backend
REGIME_BI = 0
REGIME_AGENT = 1
REGIME_EGO = 2
REGIME_AWAY = 3


def agent_risk_batch(rel, v_e, v_i, mu, omega, kappa, lam, kc, eps):
    """Per-row risk for K (ego, agent) pairs.

    rel: (K, 2) agent position minus ego position, meters
    v_e, v_i: (K, 2) velocities, m/s
    mu: (K,) agent-type coefficients
    omega: (4,) interaction weights indexed by regime code
    kc: product of the two calibration constants

    Returns (risk, regime, dist, closing_speed, alpha, beta), each (K,).
    """
    rel = np.asarray(rel, dtype=np.float64)
    v_e = np.asarray(v_e, dtype=np.float64)
    v_i = np.asarray(v_i, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)

    dist = np.sqrt(rel[:, 0] ** 2 + rel[:, 1] ** 2)
    inv = 1.0 / (dist + eps)
    rhx = rel[:, 0] * inv
    rhy = rel[:, 1] * inv

    d_ei = v_e[:, 0] * rel[:, 0] + v_e[:, 1] * rel[:, 1]
    d_ie = -(v_i[:, 0] * rel[:, 0] + v_i[:, 1] * rel[:, 1])
    regime = np.full(rel.shape[0], REGIME_AWAY, dtype=np.int64)
    regime[(d_ei > 0.0) & (d_ie > 0.0)] = REGIME_BI
    regime[(d_ei <= 0.0) & (d_ie > 0.0)] = REGIME_AGENT
    regime[(d_ei > 0.0) & (d_ie <= 0.0)] = REGIME_EGO

    vrx = v_e[:, 0] - v_i[:, 0]
    vry = v_e[:, 1] - v_i[:, 1]
    s = np.maximum(0.0, vrx * rhx + vry * rhy)
    alpha = np.exp(kappa * s)

    cross = vrx * rhy - vry * rhx
    sin2 = cross * cross / (vrx * vrx + vry * vry + eps)
    beta = np.exp(-lam * sin2)

    risk = kc * omega[regime] * mu * alpha * beta * inv
    return risk, regime, dist, s, alpha, beta


def splat_max(canvas, us, vs, amps, sigma_x, sigma_y):
    """Max-composite Gaussian blobs onto a (H, W) canvas, in place.

    us/vs are pixel-space blob centers (x = column, y = row), amps their
    peak amplitudes. No truncation window: the full canvas is evaluated
    for every blob so decay properties hold everywhere.
    """
    h, w = canvas.shape
    xs = np.arange(w, dtype=np.float64)
    ys = np.arange(h, dtype=np.float64)
    tx = 2.0 * sigma_x * sigma_x
    ty = 2.0 * sigma_y * sigma_y
    for u, v, a in zip(us, vs, amps):
        if a == 0.0:
            continue
        ex = -((xs - u) ** 2) / tx
        ey = -((ys - v) ** 2) / ty
        np.maximum(canvas, a * np.exp(ey[:, None] + ex[None, :]), out=canvas)
    return canvas
