"""Activation-weight equalization.

For a shared channel ``i`` with activation range ``r_x[i]`` and weight range
``r_w[i]`` the scale ``s[i] = sqrt(r_x[i] / r_w[i])`` makes both equalized
ranges equal to ``sqrt(r_x[i] * r_w[i])``. Activations are divided by ``s``
and weight rows multiplied by it, which leaves ``X @ W`` unchanged.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError, ShapeError, UnsupportedFoldError, UnsupportedSizeError
from .layers import HOMOGENEOUS, LinearLayer
from .tensor import COLS, ROWS, ChannelStats, as_matrix, as_vector, channel_stats

SCALE_BOUNDS = (1e-4, 1e4)


def _ranges(r_x, r_w) -> tuple[np.ndarray, np.ndarray]:
    r_x = as_vector(r_x, name="r_x")
    r_w = as_vector(r_w, name="r_w")
    if r_x.shape != r_w.shape:
        raise ShapeError(f"range vectors differ in length: {r_x.shape[0]} vs {r_w.shape[0]}")
    if np.any(r_x < 0) or np.any(r_w < 0):
        raise InvalidInputError("channel ranges must be non-negative")
    return r_x, r_w


def compute_equalization_factors(r_x, r_w, *, clip: bool = True, bounds=SCALE_BOUNDS) -> np.ndarray:
    """Per-channel equalization scales from activation and weight ranges.

    Channels where either range is zero get ``s = 1``. With ``clip`` the
    result is clamped to ``bounds``.
    """
    r_x, r_w = _ranges(r_x, r_w)
    live = (r_x > 0) & (r_w > 0)
    s = np.ones_like(r_x)
    s[live] = np.sqrt(r_x[live] / r_w[live])
    if clip:
        s = np.clip(s, *bounds)
    return s


def _check_scale(s, n: int) -> np.ndarray:
    s = as_vector(s, name="s")
    if s.shape[0] != n:
        raise ShapeError(f"scale vector has length {s.shape[0]}, expected {n}")
    if np.any(s <= 0):
        raise InvalidInputError("equalization scales must be strictly positive")
    return s


def difficulty_ratios(x, w) -> tuple[np.ndarray, np.ndarray]:
    """Channel range over tensor range, for activations and for weights."""
    x = as_matrix(x, name="X")
    w = as_matrix(w, name="W")
    if x.shape[1] != w.shape[0]:
        raise ShapeError(f"X has {x.shape[1]} channels, W has {w.shape[0]}")
    return _ratios(channel_stats(x, COLS)), _ratios(channel_stats(w, ROWS))


def _ratios(st: ChannelStats) -> np.ndarray:
    big = st.tensor_range()
    if big == 0:
        return np.zeros(st.channels)
    return st.range / big


def objective_from_stats(x_stats: ChannelStats, w_stats: ChannelStats) -> float:
    """Sum over channels of the activation ratio times the weight ratio."""
    if x_stats.channels != w_stats.channels:
        raise ShapeError(f"X has {x_stats.channels} channels, W has {w_stats.channels}")
    return float(np.sum(_ratios(x_stats) * _ratios(w_stats)))


def difficulty_objective(x, w) -> float:
    x = as_matrix(x, name="X")
    w = as_matrix(w, name="W")
    if x.shape[1] != w.shape[0]:
        raise ShapeError(f"X has {x.shape[1]} channels, W has {w.shape[0]}")
    return objective_from_stats(channel_stats(x, COLS), channel_stats(w, ROWS))


def range_objective(r_x, r_w, s=None) -> float:
    """Objective evaluated on ranges only, after scaling by ``s``.

    The tensor range is approximated by the largest channel range, which is
    exact for channels whose value intervals share a common point (e.g. all
    containing zero).
    """
    r_x, r_w = _ranges(r_x, r_w)
    if s is not None:
        s = _check_scale(s, r_x.shape[0])
        r_x, r_w = r_x / s, r_w * s
    den = r_x.max() * r_w.max()
    if den == 0:
        return 0.0
    return float(np.sum(r_x * r_w) / den)


def apply_equalization(x, w, s) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(X / s, s[:, None] * W)``."""
    x = as_matrix(x, name="X")
    w = as_matrix(w, name="W")
    if x.shape[1] != w.shape[0]:
        raise ShapeError(f"X has {x.shape[1]} channels, W has {w.shape[0]}")
    s = _check_scale(s, x.shape[1])
    return x / s, w * s[:, None]


def fold_scale_into_previous(prev: LinearLayer, s) -> LinearLayer:
    """Divide the outputs of ``prev`` by ``s`` through its weights and bias.

    Only legal when ``prev`` ends in an activation ``f`` with
    ``f(z / s) = f(z) / s``.
    """
    s = _check_scale(s, prev.out_dim)
    if prev.activation not in HOMOGENEOUS:
        raise UnsupportedFoldError(f"cannot fold a scale through a {prev.activation!r} activation")
    return prev.replace(weight=prev.weight / s, bias=prev.bias / s)


def grid_search_equalization(r_x, r_w, grid_points: int = 64, *, max_channels: int = 4) -> np.ndarray:
    """Exhaustive search over a per-channel log grid, as a reference for the closed form.

    Each live channel's grid spans the range ratios ``r_x / r_w`` and their
    square roots (so the closed-form point is always inside). Dead channels
    stay at 1. Ties on the objective are broken toward the grid point
    closest, in log space, to the closed-form scale.
    """
    r_x, r_w = _ranges(r_x, r_w)
    n = r_x.shape[0]
    if n > max_channels:
        raise UnsupportedSizeError(f"grid search over {n} channels (limit {max_channels})")
    if grid_points < 2:
        raise InvalidInputError("grid_points must be at least 2")
    live = (r_x > 0) & (r_w > 0)
    closed = compute_equalization_factors(r_x, r_w, clip=False)
    if not live.any():
        return closed

    ratio = r_x[live] / r_w[live]
    cands = np.concatenate([ratio, np.sqrt(ratio)])
    lo, hi = cands.min(), cands.max()
    if lo == hi:
        lo, hi = lo / 10.0, hi * 10.0
    grid = np.geomspace(lo, hi, grid_points)
    axes = [grid if ok else np.ones(1) for ok in live]

    num = np.sum(r_x * r_w)
    log_closed = np.log(closed)
    best_obj, best_dist, best = -np.inf, np.inf, None
    # iterate over the first axis, vectorise over the rest
    for s0 in axes[0]:
        rest = list(np.meshgrid(*axes[1:], indexing="ij")) if n > 1 else []
        s = [np.full(rest[0].shape if rest else (), s0)] + rest
        mx = np.maximum.reduce([r_x[i] / s[i] for i in range(n)])
        mw = np.maximum.reduce([r_w[i] * s[i] for i in range(n)])
        with np.errstate(divide="ignore", invalid="ignore"):
            obj = np.where(mx * mw > 0, num / (mx * mw), 0.0)
        dist = sum((np.log(s[i]) - log_closed[i]) ** 2 for i in range(n))
        top = obj.max()
        tie = np.isclose(obj, top, rtol=1e-12, atol=0.0)
        idx = np.unravel_index(np.argmin(np.where(tie, dist, np.inf)), obj.shape)
        cand_obj, cand_dist = float(obj[idx]), float(dist[idx])
        if cand_obj > best_obj * (1 + 1e-12) or (
            np.isclose(cand_obj, best_obj, rtol=1e-12, atol=0.0) and cand_dist < best_dist
        ):
            best_obj, best_dist = cand_obj, cand_dist
            best = np.array([float(s[i][idx]) for i in range(n)])
    return best


def equalization_diagnostics(x_stats: ChannelStats, w_stats: ChannelStats, s, s_raw=None) -> dict:
    """Objective before and after equalizing by ``s`` (and by the unclamped ``s_raw``)."""
    out = {
        "objective_before": objective_from_stats(x_stats, w_stats),
        "objective_after": objective_from_stats(x_stats.scaled(s), _scale_rows(w_stats, s)),
    }
    if s_raw is not None:
        out["objective_after_unclamped"] = objective_from_stats(x_stats.scaled(s_raw), _scale_rows(w_stats, s_raw))
        lo, hi = SCALE_BOUNDS
        out["clamped_channels"] = int(np.sum((np.asarray(s_raw) < lo) | (np.asarray(s_raw) > hi)))
    return out


def _scale_rows(st: ChannelStats, s) -> ChannelStats:
    s = np.asarray(s, dtype=np.float64)
    return ChannelStats(st.min * s, st.max * s, st.mean * s, st.count)

