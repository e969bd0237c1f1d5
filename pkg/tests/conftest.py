import math

import numpy as np
import pytest

from riskgen import default_fixture_path
from riskgen.scenario import load_scenario


def scalar_agent_risk(ego_p, ego_v, ag_p, ag_v, mu, params):
    """Independent scalar re-derivation of the per-agent risk (math module only).

    Kept free of riskgen.kernels so it can serve as the oracle for the
    production path.
    """
    eps = params.epsilon
    rx, ry = ag_p[0] - ego_p[0], ag_p[1] - ego_p[1]
    d = math.hypot(rx, ry)
    rhx, rhy = rx / (d + eps), ry / (d + eps)
    d_ei = ego_v[0] * rx + ego_v[1] * ry
    d_ie = -(ag_v[0] * rx + ag_v[1] * ry)
    if d_ei > 0 and d_ie > 0:
        w = params.omega_bi
    elif d_ei <= 0 and d_ie > 0:
        w = params.omega_agent
    elif d_ei > 0 and d_ie <= 0:
        w = params.omega_ego
    else:
        w = params.omega_away
    vx, vy = ego_v[0] - ag_v[0], ego_v[1] - ag_v[1]
    s = max(0.0, vx * rhx + vy * rhy)
    alpha = math.exp(params.kappa * s)
    cross = vx * rhy - vy * rhx
    sin2 = cross * cross / (vx * vx + vy * vy + eps)
    beta = math.exp(-params.lambda_lat * sin2)
    return params.k_const * params.c_const * w * mu * alpha * beta / (d + eps)


@pytest.fixture(scope="session")
def fixture_path():
    return str(default_fixture_path())


@pytest.fixture(scope="session")
def left_turn(fixture_path):
    return load_scenario(fixture_path)


def fd_model_grad(loss_fn, model, step=1e-5):
    """Central-difference parameter gradients of a scalar model loss."""
    grads = {}
    for name, arr in model.params.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = loss_fn(model)
            flat[i] = orig - step
            lo = loss_fn(model)
            flat[i] = orig
            gf[i] = (hi - lo) / (2.0 * step)
        grads[name] = g
    return grads


def max_rel_grad_err(analytic, numeric):
    worst = 0.0
    for k in analytic:
        a = analytic[k].reshape(-1)
        n = numeric[k].reshape(-1)
        scale = max(1e-8, float(np.abs(n).max()))
        worst = max(worst, float(np.abs(a - n).max()) / scale)
    return worst
