"""Uniform per-tensor affine quantization on an unsigned ``b``-bit grid.

Codes are ``clamp(rint(x / step) + Z, 0, 2**b - 1)`` with
``step = (x_max - x_min) / (2**b - 1)`` and ``Z = clamp(rint(-x_min / step))``.
Ties round half to even everywhere. Without any equalization or correction
this is the plain round-to-nearest (RTN) baseline.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidInputError, InvalidRangeError, ShapeError
from .tensor import as_matrix

MIN_BITS = 2
MAX_BITS = 8


@dataclass(frozen=True)
class QuantParams:
    step: float
    zero_point: int
    bits: int
    x_min: float
    x_max: float
    symmetric: bool = False

    @property
    def q_min(self) -> int:
        return 0

    @property
    def q_max(self) -> int:
        return (1 << self.bits) - 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["q_min"] = self.q_min
        d["q_max"] = self.q_max
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QuantParams":
        p = cls(
            step=float(d["step"]),
            zero_point=int(d["zero_point"]),
            bits=int(d["bits"]),
            x_min=float(d["x_min"]),
            x_max=float(d["x_max"]),
            symmetric=bool(d.get("symmetric", False)),
        )
        _check_params(p)
        return p


@dataclass(frozen=True)
class QuantizedMatrix:
    codes: np.ndarray  # int32, every entry in [q_min, q_max]
    params: QuantParams

    @property
    def shape(self) -> tuple[int, int]:
        return self.codes.shape


def check_bits(bits) -> int:
    if isinstance(bits, bool) or int(bits) != bits or not MIN_BITS <= bits <= MAX_BITS:
        raise InvalidInputError(f"bits must be an integer in [{MIN_BITS}, {MAX_BITS}], got {bits!r}")
    return int(bits)


def _check_params(p: QuantParams) -> None:
    check_bits(p.bits)
    if not (math.isfinite(p.step) and p.step > 0):
        raise InvalidInputError(f"step must be positive and finite, got {p.step}")
    if not 0 <= p.zero_point <= p.q_max:
        raise InvalidInputError(f"zero point {p.zero_point} outside [0, {p.q_max}]")


def compute_quant_params(x_min: float, x_max: float, bits: int, *, symmetric: bool = False) -> QuantParams:
    """Step size and zero point for the range ``[x_min, x_max]``.

    With ``symmetric=True`` the range is widened to ``[-m, m]`` with
    ``m = max(|x_min|, |x_max|)`` and the zero point is pinned at ``2**(b-1)``.
    A degenerate range (``x_min == x_max``) gets ``step = 1`` and ``Z = 0``.
    """
    bits = check_bits(bits)
    x_min, x_max = float(x_min), float(x_max)
    if not (math.isfinite(x_min) and math.isfinite(x_max)):
        raise InvalidInputError(f"non-finite range [{x_min}, {x_max}]")
    if x_min > x_max:
        raise InvalidRangeError(f"x_min={x_min} > x_max={x_max}")
    q_max = (1 << bits) - 1
    if symmetric:
        m = max(abs(x_min), abs(x_max))
        x_min, x_max = -m, m
    if x_max == x_min:
        return QuantParams(1.0, 0, bits, x_min, x_max, symmetric)
    step = (x_max - x_min) / q_max
    if symmetric:
        zp = 1 << (bits - 1)
    else:
        zp = int(np.clip(np.rint(-x_min / step), 0, q_max))
    return QuantParams(step, zp, bits, x_min, x_max, symmetric)


def quantize(x, params: QuantParams) -> QuantizedMatrix:
    x = as_matrix(x, name="x")
    _check_params(params)
    # clip in float before the integer cast so huge inputs cannot overflow
    q = np.rint(x / params.step) + params.zero_point
    q = np.clip(q, params.q_min, params.q_max).astype(np.int32)
    return QuantizedMatrix(q, params)


def dequantize(q: QuantizedMatrix) -> np.ndarray:
    p = q.params
    codes = np.asarray(q.codes)
    if codes.size and (codes.min() < p.q_min or codes.max() > p.q_max):
        raise InvalidInputError("codes outside the quantization grid")
    return (codes.astype(np.float64) - p.zero_point) * p.step


def quant_dequant(x, params: QuantParams) -> np.ndarray:
    """Snap ``x`` onto the grid described by ``params``."""
    return dequantize(quantize(x, params))


def fake_quantize(x, bits: int = 8, x_range: tuple[float, float] | None = None, *, symmetric: bool = False) -> np.ndarray:
    """Quantize then dequantize ``x``.

    ``x_range=None`` takes the range from ``x`` itself (dynamic); a
    ``(x_min, x_max)`` pair uses fixed calibrated bounds and saturates
    anything outside them.
    """
    x = as_matrix(x, name="x")
    if x_range is None:
        if x.size == 0:
            return x.copy()
        lo, hi = float(x.min()), float(x.max())
    else:
        if len(x_range) != 2:
            raise ShapeError("x_range must be a (x_min, x_max) pair")
        lo, hi = x_range
    return quant_dequant(x, compute_quant_params(lo, hi, bits, symmetric=symmetric))
