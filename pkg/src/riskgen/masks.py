"""Multi-view motion-aware corruption masks.

Motion masks come from temporal differencing and channel averaging of a
latent video volume; geometric masks from projecting agent trajectory
points into each camera and rasterizing Gaussian blobs; the fused mask
is their clipped elementwise product.
"""

import enum
import os
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionError, DomainError
from .scenario import project_point
from .tensor import as_tensor, temporal_diff


class MaskKind(enum.Enum):
    MOTION = "motion"
    GEOMETRIC = "geometric"
    FUSED = "fused"


@dataclass
class LatentVolume:
    """Video latent/feature values shaped (B, N_c, C, T, H, W)."""

    data: np.ndarray

    def __post_init__(self):
        self.data = as_tensor(self.data)
        if self.data.ndim != 6:
            raise DimensionError(
                f"latent volume must be rank 6 (B, Nc, C, T, H, W), got {self.data.shape}"
            )
        if min(self.data.shape) < 1:
            raise DimensionError(f"latent volume has an empty axis: {self.data.shape}")


@dataclass
class MaskVolume:
    """Per-batch, per-camera, per-frame mask in [0, 1], shaped (B, N_c, T, H, W)."""

    data: np.ndarray
    kind: MaskKind

    def __post_init__(self):
        self.data = as_tensor(self.data)
        if self.data.ndim != 5:
            raise DimensionError(
                f"mask volume must be rank 5 (B, Nc, T, H, W), got {self.data.shape}"
            )
        if (self.data < 0).any() or (self.data > 1).any():
            raise DomainError("mask values must lie in [0, 1]")


@dataclass
class BlobParams:
    sigma_w: float = 2.0          # pixels, latent resolution
    sigma_h: float = 2.0
    soft_threshold: float = 0.0   # motion values below this are clamped away
    points_per_agent: int = 9

    def __post_init__(self):
        if self.sigma_w <= 0 or self.sigma_h <= 0:
            raise DomainError("blob sigmas must be positive")
        if not 0 <= self.soft_threshold < 1:
            raise DomainError("soft_threshold must lie in [0, 1)")
        if self.points_per_agent < 1:
            raise DomainError("points_per_agent must be >= 1")


def motion_mask(latent, params):
    """Motion magnitude mask from temporal differencing.

    Per (batch, camera) slice: abs frame difference, channel mean, then
    min-max normalization to [0, 1] (constant slices map to zero) and an
    optional soft threshold v -> max(0, v - tau) / (1 - tau). The T-1
    difference frames are padded back to T by replicating the last one.
    """
    x = latent.data
    if x.shape[3] < 2:
        raise DimensionError(f"motion mask needs T >= 2 frames, got {x.shape[3]}")
    diff = temporal_diff(x, axis=3)           # (B, Nc, C, T-1, H, W)
    mot = diff.mean(axis=2)                   # (B, Nc, T-1, H, W)
    b, nc = mot.shape[:2]
    for i in range(b):
        for j in range(nc):
            lo = mot[i, j].min()
            hi = mot[i, j].max()
            if hi - lo > 0:
                mot[i, j] = (mot[i, j] - lo) / (hi - lo)
            else:
                mot[i, j] = 0.0
    tau = params.soft_threshold
    if tau > 0:
        mot = np.maximum(0.0, mot - tau) / (1.0 - tau)
    mot = np.concatenate([mot, mot[:, :, -1:]], axis=2)
    return MaskVolume(data=mot, kind=MaskKind.MOTION)


def _sample_points(motion, t):
    """3-D sample points for one agent at frame t.

    Box footprint corners and center, the trajectory midpoint to the next
    frame, then extra points interpolated along that segment up to
    points_per_agent; all at box mid-height except the ground corners.
    """
    box = motion.boxes[t]
    h = motion.size[2]
    pts = [np.array([c[0], c[1], 0.0]) for c in box.footprint_corners()]
    pts.append(box.center.copy())
    traj = motion.trajectory
    t_next = min(t + 1, len(traj) - 1)
    a = traj.positions[t]
    b = traj.positions[t_next]
    mid = 0.5 * (a + b)
    pts.append(np.array([mid[0], mid[1], h / 2.0]))
    return pts


def _extra_points(motion, t, count):
    traj = motion.trajectory
    h = motion.size[2]
    t_next = min(t + 1, len(traj) - 1)
    a = traj.positions[t]
    b = traj.positions[t_next]
    out = []
    for k in range(count):
        f = (k + 1) / (count + 1)
        p = a + f * (b - a)
        out.append(np.array([p[0], p[1], h / 2.0]))
    return out


def geometric_mask(scenario, motions, params, latent_hw, batch=1):
    """Gaussian-blob rasterization of projected agent sample points.

    Per frame and camera, every sampled 3-D point that projects inside
    the view contributes a unit-amplitude blob with stds (sigma_w,
    sigma_h); blobs aggregate by pixel-wise maximum. Camera pixels are
    scaled to the latent resolution (W / cam_width, H / cam_height).
    """
    if not scenario.cameras:
        raise DomainError("geometric mask needs at least one camera")
    lat_h, lat_w = latent_hw
    t_frames = scenario.horizon
    nc = len(scenario.cameras)
    out = np.zeros((batch, nc, t_frames, lat_h, lat_w))
    base = max(0, params.points_per_agent - 6)
    for ci, cam in enumerate(scenario.cameras):
        sx = lat_w / cam.width
        sy = lat_h / cam.height
        for t in range(t_frames):
            us, vs, amps = [], [], []
            for m in motions:
                pts = _sample_points(m, t) + _extra_points(m, t, base)
                for p in pts:
                    pixel, _, visible = project_point(cam, p)
                    if visible:
                        us.append(pixel[0] * sx)
                        vs.append(pixel[1] * sy)
                        amps.append(1.0)
            if us:
                kernels.splat_max(
                    out[0, ci, t],
                    np.asarray(us),
                    np.asarray(vs),
                    np.asarray(amps),
                    params.sigma_w,
                    params.sigma_h,
                )
    np.clip(out, 0.0, 1.0, out=out)
    if batch > 1:
        out[1:] = out[0]
    return MaskVolume(data=out, kind=MaskKind.GEOMETRIC)


def fuse_masks(geo, mot):
    """Final corruption mask: clip(geometric * motion, 0, 1)."""
    if geo.kind is not MaskKind.GEOMETRIC or mot.kind is not MaskKind.MOTION:
        raise DimensionError(
            f"fuse_masks expects (geometric, motion), got ({geo.kind}, {mot.kind})"
        )
    if geo.data.shape != mot.data.shape:
        raise DimensionError(
            f"mask shapes differ: {geo.data.shape} vs {mot.data.shape}"
        )
    return MaskVolume(
        data=np.clip(geo.data * mot.data, 0.0, 1.0), kind=MaskKind.FUSED
    )


def export_masks(mask, out_dir):
    """Write one binary PGM (P5, maxval 255) per (batch, camera, frame).

    Returns the relative filenames, ordered (b, cam, frame).
    """
    os.makedirs(out_dir, exist_ok=True)
    b, nc, t_frames, h, w = mask.data.shape
    names = []
    for i in range(b):
        for c in range(nc):
            for t in range(t_frames):
                name = f"b{i}_cam{c}_f{t}.pgm"
                img = np.round(255.0 * mask.data[i, c, t]).astype(np.uint8)
                with open(os.path.join(out_dir, name), "wb") as fh:
                    fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
                    fh.write(img.tobytes(order="C"))
                names.append(name)
    return names
