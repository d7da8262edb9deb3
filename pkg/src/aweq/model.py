"""FP reference inference, calibration, and synthetic outlier data."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import EmptyInputError, InvalidInputError, ShapeError
from .layers import ModelSpec, apply_activation
from .tensor import COLS, ChannelStats, accumulate_stats, as_matrix


class Trace(NamedTuple):
    """Per-layer tensors from one forward pass.

    ``inputs[k]`` is what layer ``k``'s weight multiplies (after any
    ``input_scale``), ``preacts[k]`` is before the activation and
    ``outputs[k]`` after it.
    """

    inputs: list
    preacts: list
    outputs: list


def _check_input(model: ModelSpec, x) -> np.ndarray:
    x = as_matrix(x, name="X")
    if x.shape[1] != model.input_dim:
        raise ShapeError(f"X has {x.shape[1]} features, model expects {model.input_dim}")
    return x


def forward_fp(model: ModelSpec, x, *, trace: bool = False):
    """Float64 forward pass; with ``trace=True`` also returns a :class:`Trace`."""
    x = _check_input(model, x)
    tr = Trace([], [], [])
    for layer in model.layers:
        eff = layer.effective_input(x)
        z = eff @ layer.weight + layer.bias
        x = apply_activation(z, layer.activation)
        tr.inputs.append(eff)
        tr.preacts.append(z)
        tr.outputs.append(x)
    return (x, tr) if trace else x


def calibrate(model: ModelSpec, samples, *, batch_size: int | None = None) -> list[ChannelStats]:
    """Channel statistics of every layer's (effective) input.

    Samples are streamed in batches of ``batch_size`` rows; the result does
    not depend on the batching beyond float rounding of the means.
    """
    samples = _check_input(model, samples)
    n = samples.shape[0]
    if n == 0:
        raise EmptyInputError("calibration set is empty")
    step = n if batch_size is None else int(batch_size)
    if step < 1:
        raise InvalidInputError("batch_size must be positive")
    stats: list[ChannelStats | None] = [None] * len(model.layers)
    for start in range(0, n, step):
        _, tr = forward_fp(model, samples[start:start + step], trace=True)
        for k, eff in enumerate(tr.inputs):
            stats[k] = accumulate_stats(stats[k], eff, COLS)
    return stats


def synth_outlier_activations(
    n: int,
    dims: int,
    outlier_channels: int = 1,
    magnitude: float = 50.0,
    seed: int = 0,
    *,
    return_channels: bool = False,
):
    """Standard-normal activations with a few channels blown up by ``magnitude``.

    Returned as float32. The outlier channel indices are drawn from ``seed``
    too, so two calls with the same arguments produce identical output.
    """
    if n < 2 or dims < 1:
        raise InvalidInputError(f"need n >= 2 and dims >= 1, got n={n}, dims={dims}")
    if not 0 <= outlier_channels <= dims:
        raise InvalidInputError(f"outlier_channels={outlier_channels} not in [0, {dims}]")
    if magnitude < 1:
        raise InvalidInputError(f"magnitude must be >= 1, got {magnitude}")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(dims, size=outlier_channels, replace=False))
    x = rng.standard_normal((n, dims))
    x[:, idx] *= magnitude
    x = x.astype(np.float32)

    r = x.max(axis=0).astype(np.float64) - x.min(axis=0)
    floor = magnitude / 2 * np.median(r)
    if outlier_channels and np.any(r[idx] < floor):
        raise RuntimeError("outlier channel range fell below magnitude/2 x median range; use more samples")
    return (x, idx) if return_channels else x
