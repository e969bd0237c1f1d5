"""Geometry-appearance alignment kernels.

Projects patch features to the latent width, compresses them to a fixed
token count with learnable-query cross-attention (optional null-token
dropout), pools appearance layers, and scores cosine alignment between
the pooled geometric and appearance vectors with analytic gradients.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .tensor import as_tensor, softmax_rows

_EPS = 1e-12


@dataclass
class CompressionParams:
    """Projection, query, attention, and dropout parameters.

    proj_w: (D_src, D), proj_b: (D,); queries: (N_tok, D); w_q/w_k/w_v:
    (D, D); null_tokens: (N_tok, D); p_drop in [0, 1).
    """

    proj_w: np.ndarray
    proj_b: np.ndarray
    queries: np.ndarray
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    null_tokens: np.ndarray
    p_drop: float = 0.1

    def __post_init__(self):
        for name in ("proj_w", "proj_b", "queries", "w_q", "w_k", "w_v", "null_tokens"):
            setattr(self, name, as_tensor(getattr(self, name)))
        d = self.proj_w.shape[1]
        if self.proj_b.shape != (d,):
            raise DimensionError(f"proj_b shape {self.proj_b.shape}, expected ({d},)")
        if self.queries.shape[1] != d:
            raise DimensionError("queries width must match projection output dim")
        for name in ("w_q", "w_k", "w_v"):
            if getattr(self, name).shape != (d, d):
                raise DimensionError(f"{name} must be ({d}, {d})")
        if self.null_tokens.shape != self.queries.shape:
            raise DimensionError("null_tokens must match queries shape")
        if not 0 <= self.p_drop <= 1:
            raise DomainError(f"p_drop must lie in [0, 1], got {self.p_drop}")

    @classmethod
    def identity(cls, d, n_tok, queries=None, p_drop=0.0):
        """Square identity projection and identity attention weights."""
        q = np.zeros((n_tok, d)) if queries is None else as_tensor(queries)
        return cls(
            proj_w=np.eye(d),
            proj_b=np.zeros(d),
            queries=q,
            w_q=np.eye(d),
            w_k=np.eye(d),
            w_v=np.eye(d),
            null_tokens=np.zeros((n_tok, d)),
            p_drop=p_drop,
        )

    @classmethod
    def random(cls, rng, d_src, d, n_tok, p_drop=0.1, scale=0.02):
        return cls(
            proj_w=scale * rng.normal(size=(d_src, d)),
            proj_b=np.zeros(d),
            queries=rng.normal(size=(n_tok, d)),
            w_q=np.eye(d) + scale * rng.normal(size=(d, d)),
            w_k=np.eye(d) + scale * rng.normal(size=(d, d)),
            w_v=np.eye(d) + scale * rng.normal(size=(d, d)),
            null_tokens=scale * rng.normal(size=(n_tok, d)),
            p_drop=p_drop,
        )


def project_features(features, params):
    """Affine per-token projection: (S, P, D_src) -> (S, P, D)."""
    f = as_tensor(features)
    if f.ndim != 3:
        raise DimensionError(f"features must be rank 3 (S, P, D_src), got {f.shape}")
    if f.shape[2] != params.proj_w.shape[0]:
        raise DimensionError(
            f"feature dim {f.shape[2]} != projection input dim {params.proj_w.shape[0]}"
        )
    return f @ params.proj_w + params.proj_b


def compress_tokens(f_proj, params, rng=None, training=False):
    """Single-head cross-attention compression: (S, P, D) -> (S, N_tok, D).

    G = softmax(Q W_q (F W_k)^T / sqrt(D)) (F W_v) per sample. In
    training mode each sample is independently replaced by the null
    token set with probability p_drop (classifier-free-guidance style);
    inference never drops.
    """
    f = as_tensor(f_proj)
    if f.ndim != 3:
        raise DimensionError(f"f_proj must be rank 3 (S, P, D), got {f.shape}")
    d = params.queries.shape[1]
    if f.shape[2] != d:
        raise DimensionError(f"token dim {f.shape[2]} != param dim {d}")
    if training and params.p_drop > 0 and rng is None:
        raise DomainError("training-mode dropout needs an Rng")
    q = params.queries @ params.w_q
    scale = 1.0 / np.sqrt(d)
    out = np.empty((f.shape[0], params.queries.shape[0], d))
    for i in range(f.shape[0]):
        k = f[i] @ params.w_k
        v = f[i] @ params.w_v
        attn = softmax_rows((q @ k.T) * scale)
        out[i] = attn @ v
    if training and params.p_drop > 0:
        for i in range(f.shape[0]):
            if rng.random() < params.p_drop:
                out[i] = params.null_tokens
    return out


def pool_appearance(layer_tokens):
    """Mean over spatial tokens within each layer, then mean over layers.

    layer_tokens: list of K arrays shaped (S, N_s, D) -> (S, D).
    """
    if not layer_tokens:
        raise DomainError("pool_appearance needs at least one layer")
    layers = [as_tensor(x) for x in layer_tokens]
    shape = layers[0].shape
    for x in layers:
        if x.shape != shape:
            raise DimensionError(f"layer shapes differ: {x.shape} vs {shape}")
    pooled = [x.mean(axis=1) for x in layers]
    return np.mean(pooled, axis=0)


def alignment_loss(g_tokens, r, eps=_EPS):
    """Cosine alignment of pooled geometric tokens against appearance.

    g = token mean of g_tokens (S, N_tok, D); loss = 1 - mean_i cos(g_i,
    r_i). Returns (loss, grad wrt g_tokens, grad wrt r); gradients are
    analytic through the mean and the L2 normalizations.
    """
    g_tokens = as_tensor(g_tokens)
    r = as_tensor(r)
    if g_tokens.ndim != 3 or r.ndim != 2:
        raise DimensionError(
            f"expected g_tokens (S, N_tok, D) and r (S, D), got {g_tokens.shape}, {r.shape}"
        )
    if g_tokens.shape[0] != r.shape[0] or g_tokens.shape[2] != r.shape[1]:
        raise DimensionError(
            f"sample/feature dims differ: {g_tokens.shape} vs {r.shape}"
        )
    s, n_tok, _ = g_tokens.shape
    g = g_tokens.mean(axis=1)                       # (S, D)
    gn = np.linalg.norm(g, axis=1)
    rn = np.linalg.norm(r, axis=1)
    if (gn < eps).any() or (rn < eps).any():
        raise DomainError("alignment_loss: zero-norm pooled vector")
    ghat = g / gn[:, None]
    rhat = r / rn[:, None]
    cos = (ghat * rhat).sum(axis=1)
    loss = 1.0 - float(cos.mean())
    # d cos / d g = (rhat - cos * ghat) / |g|; loss averages -cos over samples
    dg = -(rhat - cos[:, None] * ghat) / (gn[:, None] * s)
    dr = -(ghat - cos[:, None] * rhat) / (rn[:, None] * s)
    grad_g = np.repeat(dg[:, None, :], n_tok, axis=1) / n_tok
    return loss, grad_g, dr
