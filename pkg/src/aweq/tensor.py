"""Dense matrix helpers and per-channel statistics.

Matrices are plain 2-D ``numpy`` arrays. Statistics are always computed in
float64 regardless of the storage dtype.

Channel axis convention: for activations ``X`` (rows are samples) a channel
is a column; for weights ``W`` (rows are input channels) a channel is a row.
Channel ``i`` of ``X`` therefore multiplies channel ``i`` of ``W`` in ``X @ W``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import EmptyInputError, InvalidInputError, ShapeError

ChannelAxis = Literal["cols", "rows"]
COLS: ChannelAxis = "cols"
ROWS: ChannelAxis = "rows"


def as_matrix(a, *, name: str = "matrix", dtype=np.float64) -> np.ndarray:
    """Validate ``a`` as a finite 2-D real matrix and return it as ``dtype``."""
    arr = np.asarray(a)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.number) or np.iscomplexobj(arr):
        raise InvalidInputError(f"{name} must be real-valued, got dtype {arr.dtype}")
    arr = np.ascontiguousarray(arr, dtype=dtype)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains NaN or Inf")
    return arr


def as_vector(v, *, name: str = "vector", dtype=np.float64) -> np.ndarray:
    arr = np.asarray(v)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {arr.shape}")
    arr = np.ascontiguousarray(arr, dtype=dtype)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains NaN or Inf")
    return arr


def matmul(a, b) -> np.ndarray:
    """Matrix product accumulated in float64."""
    a = as_matrix(a, name="A")
    b = as_matrix(b, name="B")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


@dataclass(frozen=True)
class ChannelStats:
    """Per-channel min / max / mean over ``count`` reduced elements."""

    min: np.ndarray
    max: np.ndarray
    mean: np.ndarray
    count: int

    @property
    def range(self) -> np.ndarray:
        return self.max - self.min

    @property
    def channels(self) -> int:
        return int(self.min.shape[0])

    def tensor_range(self) -> float:
        """Global max minus global min of the tensor these stats describe."""
        return float(self.max.max() - self.min.min())

    def scaled(self, s) -> "ChannelStats":
        """Stats of the tensor after dividing channel ``i`` by ``s[i] > 0``."""
        s = np.asarray(s, dtype=np.float64)
        return ChannelStats(self.min / s, self.max / s, self.mean / s, self.count)


def _reduce_axis(axis: ChannelAxis) -> int:
    if axis == COLS:
        return 0
    if axis == ROWS:
        return 1
    raise InvalidInputError(f"axis must be 'cols' or 'rows', got {axis!r}")


def channel_stats(t, axis: ChannelAxis = COLS) -> ChannelStats:
    t = as_matrix(t, name="tensor")
    if t.size == 0:
        raise EmptyInputError("channel_stats of an empty matrix")
    red = _reduce_axis(axis)
    mean = t.mean(axis=red)
    lo, hi = t.min(axis=red), t.max(axis=red)
    # mean can drift one ulp outside [min, max] for near-constant channels
    mean = np.clip(mean, lo, hi)
    return ChannelStats(lo, hi, mean, int(t.shape[red]))


def tensor_range(t) -> float:
    t = as_matrix(t, name="tensor")
    if t.size == 0:
        raise EmptyInputError("tensor_range of an empty matrix")
    return float(t.max() - t.min())


def accumulate_stats(running: ChannelStats | None, batch, axis: ChannelAxis = COLS) -> ChannelStats:
    """Fold one more batch into streaming channel statistics.

    ``running=None`` starts a fresh accumulation. Min and max are exact; the
    mean is updated as a count-weighted combination of the two partial means.
    """
    new = channel_stats(batch, axis)
    if running is None:
        return new
    if running.channels != new.channels:
        raise ShapeError(f"batch has {new.channels} channels, running stats have {running.channels}")
    n0, n1 = running.count, new.count
    total = n0 + n1
    mean = running.mean + (new.mean - running.mean) * (n1 / total)
    lo = np.minimum(running.min, new.min)
    hi = np.maximum(running.max, new.max)
    return ChannelStats(lo, hi, np.clip(mean, lo, hi), total)
