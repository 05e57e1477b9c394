"""Dense float64 tensors.

Tensors are plain row-major ``numpy.ndarray`` values of dtype float64.  The
helpers here enforce the few rules the rest of the package relies on:
non-empty shapes with positive extents and finite contents.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import NumericInputError, ShapeError

Shape = Sequence[int]


def _check_shape(shape: Shape) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if not shape or any(s < 1 for s in shape):
        raise ShapeError(f"invalid shape {shape}: extents must be >= 1 and non-empty")
    return shape


def tensor_new(shape: Shape, fill: float = 0.0) -> np.ndarray:
    shape = _check_shape(shape)
    if not np.isfinite(fill):
        raise NumericInputError(f"fill value {fill} is not finite")
    return np.full(shape, float(fill), dtype=np.float64)


def as_tensor(values) -> np.ndarray:
    """Copy ``values`` into a validated float64 tensor."""
    t = np.array(values, dtype=np.float64, order="C")
    if t.ndim == 0:
        t = t.reshape(1)
    _check_shape(t.shape)
    if not np.all(np.isfinite(t)):
        raise NumericInputError("tensor contains NaN or Inf")
    return t


def reshape(t: np.ndarray, new_shape: Shape) -> np.ndarray:
    new_shape = _check_shape(new_shape)
    if int(np.prod(new_shape)) != t.size:
        raise ShapeError(f"cannot reshape {t.size} elements into {new_shape}")
    return np.ascontiguousarray(t).reshape(new_shape).copy()


def argmax(t: np.ndarray) -> int:
    """Index of the largest element of a rank-1 tensor; ties go to the lowest index."""
    if t.ndim != 1:
        raise ShapeError(f"argmax expects rank 1, got rank {t.ndim}")
    if t.size == 0:
        raise ShapeError("argmax of an empty tensor")
    # np.argmax already returns the first occurrence of the maximum
    return int(np.argmax(t))
