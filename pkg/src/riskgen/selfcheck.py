"""Invariant and gradient self-check suites, runnable from the CLI.

Each check is a named function that raises AssertionError with a
diagnostic on failure. `run_all` executes every suite, prints one line
per check, and reports overall success. Setting RISKGEN_FAULT=grad
deliberately corrupts one analytic gradient (fault-injection path for
testing the harness itself).
"""

import math
import os

import numpy as np

from .align import CompressionParams, alignment_loss, compress_tokens, pool_appearance
from .dpo import (
    FlowSample,
    LN2,
    ModelVariant,
    ToyVelocityModel,
    make_pair,
    masked_fm,
    ra_dpo_loss,
    sft_loss,
)
from .masks import BlobParams, LatentVolume, fuse_masks, geometric_mask, motion_mask
from .risk import RiskParams, agent_risk, AgentSnapshot
from .scenario import KinematicState
from .tensor import Rng, matmul, softmax_rows


def _rel_err(a, b):
    denom = max(abs(a), abs(b), 1e-10)
    return abs(a - b) / denom


def _fd_model_grad(loss_fn, model, step=1e-5):
    """Central-difference gradient of a scalar loss over model parameters."""
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


def _max_rel_grad_err(analytic, numeric):
    worst = 0.0
    for k in analytic:
        a = analytic[k].reshape(-1)
        n = numeric[k].reshape(-1)
        scale = max(1e-8, float(np.abs(n).max()))
        worst = max(worst, float(np.abs(a - n).max()) / scale)
    return worst


def check_tensor_ops():
    rng = Rng(11)
    for _ in range(20):
        a = rng.normal(size=(3, 4))
        b = rng.normal(size=(4, 5))
        c = rng.normal(size=(5, 2))
        lhs = matmul(matmul(a, b), c)
        rhs = matmul(a, matmul(b, c))
        assert np.abs(lhs - rhs).max() <= 1e-9, "matmul associativity violated"
        sm = softmax_rows(rng.uniform(-50, 50, size=(4, 6)))
        assert np.abs(sm.sum(axis=1) - 1.0).max() <= 1e-12, "softmax rows must sum to 1"


def check_risk_invariances():
    rng = Rng(7)
    params = RiskParams()
    for _ in range(300):
        ego = KinematicState(rng.normal(scale=20, size=2), rng.normal(scale=5, size=2))
        pos = rng.normal(scale=20, size=2)
        vel = rng.normal(scale=5, size=2)
        if np.allclose(pos, ego.position):
            continue
        agent = AgentSnapshot("a", "car", KinematicState(pos, vel))
        base = agent_risk(ego, agent, params)
        # radial monotonicity: push the agent outward, same velocities
        scale = 1.0 + float(rng.uniform(0.1, 2.0))
        far_pos = ego.position + scale * (pos - ego.position)
        far = agent_risk(
            ego, AgentSnapshot("a", "car", KinematicState(far_pos, vel)), params
        )
        if far.regime == base.regime and base.risk > 1e-12:
            assert far.risk < base.risk, "risk must decrease with distance"
        # rigid-transform invariance
        theta = float(rng.uniform(-math.pi, math.pi))
        rot = np.array(
            [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
        )
        shift = rng.normal(scale=50, size=2)
        ego2 = KinematicState(rot @ ego.position + shift, rot @ ego.velocity)
        ag2 = AgentSnapshot("a", "car", KinematicState(rot @ pos + shift, rot @ vel))
        moved = agent_risk(ego2, ag2, params)
        assert abs(moved.risk - base.risk) <= 1e-9 * max(1.0, base.risk), (
            "risk must be invariant to rigid transforms"
        )
        assert 0.0 < base.beta_lateral <= 1.0, "beta must lie in (0, 1]"
        assert base.alpha >= 1.0, "alpha must be >= 1"


def check_mask_bounds():
    rng = Rng(5)
    for _ in range(10):
        latent = LatentVolume(rng.normal(size=(1, 2, 3, 4, 6, 6)))
        mot = motion_mask(latent, BlobParams(soft_threshold=0.2))
        assert mot.data.min() >= 0.0 and mot.data.max() <= 1.0, "motion mask out of [0,1]"
    static = LatentVolume(np.ones((1, 1, 2, 3, 4, 4)))
    assert motion_mask(static, BlobParams()).data.max() == 0.0, (
        "static latent must give a zero motion mask"
    )


def check_alignment_gradients():
    rng = Rng(13)
    fault = os.environ.get("RISKGEN_FAULT") == "grad"
    for trial in range(10):
        g = rng.normal(size=(2, 4, 8))
        r = rng.normal(size=(2, 8))
        loss, grad_g, grad_r = alignment_loss(g, r)
        if fault:
            grad_r = grad_r + 1e-3
        step = 1e-5
        for arr, grad in ((g, grad_g), (r, grad_r)):
            flat = arr.reshape(-1)
            gf = grad.reshape(-1)
            idx = int(rng.integers(0, flat.size))
            orig = flat[idx]
            flat[idx] = orig + step
            hi = alignment_loss(g, r)[0]
            flat[idx] = orig - step
            lo = alignment_loss(g, r)[0]
            flat[idx] = orig
            fd = (hi - lo) / (2 * step)
            assert _rel_err(gf[idx], fd) <= 1e-6 or abs(gf[idx] - fd) <= 1e-8, (
                f"alignment gradient mismatch: analytic {gf[idx]}, fd {fd}"
            )


def check_loss_gradients():
    rng = Rng(17)
    for variant in (ModelVariant.LINEAR, ModelVariant.ONE_HIDDEN):
        model = ToyVelocityModel.create(variant, latent_dim=5, cond_dim=3,
                                        hidden_dim=6, rng=rng)
        sample = FlowSample(
            z0=rng.normal(size=5), eps=rng.normal(size=5),
            t=0.4, cond=rng.normal(size=3),
        )
        mask = rng.uniform(0.1, 1.0, size=5)
        value, grads = sft_loss(model, sample, mask)
        numeric = _fd_model_grad(lambda m: sft_loss(m, sample, mask)[0], model)
        err = _max_rel_grad_err(grads, numeric)
        assert err <= 1e-6, f"SFT gradient error {err} ({variant})"

        reference = ToyVelocityModel.create(variant, latent_dim=5, cond_dim=3,
                                            hidden_dim=6, rng=rng)
        pair = make_pair(sample, mask, 0.2, 0.8)
        value, grads, _ = ra_dpo_loss(model, reference, pair, sample)
        numeric = _fd_model_grad(
            lambda m: ra_dpo_loss(m, reference, pair, sample)[0], model
        )
        err = _max_rel_grad_err(grads, numeric)
        assert err <= 1e-6, f"RA-DPO gradient error {err} ({variant})"


def check_dpo_neutrality():
    rng = Rng(23)
    model = ToyVelocityModel.create(ModelVariant.LINEAR, latent_dim=6, cond_dim=2, rng=rng)
    sample = FlowSample(
        z0=rng.normal(size=6), eps=rng.normal(size=6), t=0.5, cond=rng.normal(size=2)
    )
    pair = make_pair(sample, np.ones(6), 0.1, 0.9)
    for w in (1.0, 0.7):
        value, _, _ = ra_dpo_loss(model, model, pair, sample, beta=0.1, w_t=w)
        assert abs(value - w * LN2) <= 1e-12, (
            f"self-reference DPO loss {value} != w ln 2 = {w * LN2}"
        )


def check_attention_simplex():
    rng = Rng(29)
    params = CompressionParams.random(rng, d_src=6, d=4, n_tok=3, p_drop=0.0)
    f = rng.normal(size=(2, 5, 6))
    proj = f @ params.proj_w + params.proj_b
    out = compress_tokens(proj, params)
    # each output token must lie in the convex hull of the value tokens
    for i in range(2):
        v = proj[i] @ params.w_v
        lo = v.min(axis=0) - 1e-9
        hi = v.max(axis=0) + 1e-9
        assert ((out[i] >= lo) & (out[i] <= hi)).all(), (
            "attention output left the value-token hull"
        )
    pooled = pool_appearance([rng.normal(size=(2, 4, 4)) for _ in range(3)])
    assert pooled.shape == (2, 4)


ALL_CHECKS = (
    ("tensor_ops", check_tensor_ops),
    ("risk_invariances", check_risk_invariances),
    ("mask_bounds", check_mask_bounds),
    ("alignment_gradients", check_alignment_gradients),
    ("loss_gradients", check_loss_gradients),
    ("dpo_neutrality", check_dpo_neutrality),
    ("attention_simplex", check_attention_simplex),
)


def run_all(out=print):
    failures = []
    for name, fn in ALL_CHECKS:
        try:
            fn()
        except AssertionError as exc:
            failures.append(name)
            out(f"[FAIL] {name}: {exc}")
        else:
            out(f"[ok]   {name}")
    return failures
