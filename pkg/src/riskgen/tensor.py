"""Dense float64 tensor substrate: checked ops, binary I/O, seeded RNG.

Tensors are plain numpy float64 arrays in C (row-major) order; every
helper here validates shapes and returns fresh contiguous arrays. The
binary exchange format is documented next to save_tensor/load_tensor.
"""

import struct

import numpy as np

from .errors import DimensionError, DomainError, SchemaError

MAGIC = b"RFGT0001"


def as_tensor(x):
    """Coerce to a contiguous float64 array; reject non-finite payloads lazily.

    Finiteness is checked by the individual ops that require it, not here,
    so callers can represent e.g. off-screen projections.
    """
    return np.ascontiguousarray(x, dtype=np.float64)


def matmul(a, b):
    """Matrix product of a (m, k) and b (k, n)."""
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul needs 2-D inputs, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def softmax_rows(x):
    """Row-wise softmax of a (m, n) array, stabilized by row-max subtraction."""
    x = as_tensor(x)
    if x.ndim != 2:
        raise DimensionError(f"softmax_rows needs a 2-D input, got shape {x.shape}")
    if np.isnan(x).any():
        raise DomainError("softmax_rows: NaN in input")
    z = np.exp(x - x.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def temporal_diff(x, axis):
    """Absolute first difference along `axis`; output axis length T-1."""
    x = as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise DimensionError(f"axis {axis} out of range for shape {x.shape}")
    if x.shape[axis] < 2:
        raise DimensionError(
            f"temporal_diff needs axis length >= 2, got {x.shape[axis]} on axis {axis}"
        )
    return np.abs(np.diff(x, axis=axis))


def save_tensor(path, x):
    """Write the flat binary tensor format.

    Layout: 8-byte magic "RFGT0001", uint32-LE rank, rank x uint64-LE dims,
    then the float64-LE values in row-major order.
    """
    x = as_tensor(x)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", x.ndim))
        fh.write(struct.pack(f"<{x.ndim}Q", *x.shape))
        fh.write(x.astype("<f8", copy=False).tobytes(order="C"))


def load_tensor(path):
    """Read the flat binary tensor format written by save_tensor."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise SchemaError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        (rank,) = struct.unpack("<I", fh.read(4))
        dims = struct.unpack(f"<{rank}Q", fh.read(8 * rank))
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        raw = fh.read(8 * count)
        if len(raw) != 8 * count:
            raise SchemaError(f"{path}: truncated payload for dims {dims}")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(dims)


class Rng:
    """Seeded random stream backed by numpy's PCG64.

    Identical seeds reproduce identical draw sequences bit-for-bit across
    runs and platforms (PCG64 is a counter-advancing generator with a
    platform-independent stream; float draws derive deterministically from
    the integer stream).
    """

    def __init__(self, seed):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size, dtype=np.uint64, endpoint=False)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def random(self, size=None):
        return self._gen.random(size)

    def child(self, key):
        """Derive an independent, reproducible sub-stream for worker `key`."""
        seq = np.random.SeedSequence([self.seed, int(key)])
        rng = Rng.__new__(Rng)
        rng.seed = self.seed
        rng._gen = np.random.Generator(np.random.PCG64(seq))
        return rng
