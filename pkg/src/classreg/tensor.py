"""Dense tensor plumbing: float64 C-order arrays plus shape algebra.

Tensors are plain numpy arrays, always float64 and row-major. Reductions
that feed gradients or metrics must have a fixed element order, so this
module also provides strict left-fold sums (np.add.accumulate) that match
sequential loops bit-exactly regardless of array size.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def check_shape(shape) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if len(shape) == 0:
        raise ShapeError("shape must have at least one extent")
    for s in shape:
        if s < 1:
            raise ShapeError(f"all extents must be >= 1, got {shape}")
    return shape


def zeros(shape) -> np.ndarray:
    return np.zeros(check_shape(shape))


def as_tensor(data) -> np.ndarray:
    """Coerce to a float64 C-contiguous array."""
    return np.ascontiguousarray(data, dtype=np.float64)


def row_major_offset(shape, index) -> int:
    shape = check_shape(shape)
    if len(index) != len(shape):
        raise ShapeError(f"index rank {len(index)} != shape rank {len(shape)}")
    off = 0
    for extent, i in zip(shape, index):
        if not 0 <= i < extent:
            raise ShapeError(f"index {tuple(index)} out of bounds for shape {shape}")
        off = off * extent + i
    return off


def offset_to_index(shape, offset: int) -> tuple[int, ...]:
    shape = check_shape(shape)
    total = 1
    for s in shape:
        total *= s
    if not 0 <= offset < total:
        raise ShapeError(f"offset {offset} out of bounds for shape {shape}")
    index = []
    for extent in reversed(shape):
        index.append(offset % extent)
        offset //= extent
    return tuple(reversed(index))


def broadcast_mul(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Scale each channel of a [N,K,F,H,W] activation by v[K]."""
    if a.ndim != 5:
        raise ShapeError(f"expected a 5-D activation, got rank {a.ndim}")
    if v.ndim != 1 or v.shape[0] != a.shape[1]:
        raise ShapeError(
            f"channel vector length {v.shape} does not match channels {a.shape[1]}"
        )
    return a * v[None, :, None, None, None]


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """[M,D] x [D,P] with left-fold accumulation over D (order is part of
    the contract; BLAS reorders sums, so it is not used here)."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError("matmul expects rank-2 tensors")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner extents differ: {a.shape} x {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]))
    for d in range(a.shape[1]):
        out += a[:, d, None] * b[None, d, :]
    return out


def strict_sum(values: np.ndarray) -> float:
    """Left-fold sum of the flattened array (row-major order)."""
    flat = np.ascontiguousarray(values).ravel()
    if flat.size == 0:
        return 0.0
    return float(np.add.accumulate(flat)[-1])


def strict_sum_axis_last(values: np.ndarray) -> np.ndarray:
    """Left-fold sum over the last axis."""
    return np.add.accumulate(values, axis=-1)[..., -1]
