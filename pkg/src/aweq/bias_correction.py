"""Removing the output bias caused by weight quantization error.

With ``eps = W_q - W`` the expected output shift of ``x @ W_q`` relative to
``x @ W`` is ``E[x] @ eps``. Subtracting it from the layer bias costs nothing
at inference time.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyInputError, ShapeError
from .layers import LinearLayer
from .quantizer import QuantizedMatrix, dequantize
from .tensor import as_matrix, as_vector


def weight_quant_error(w, w_q: QuantizedMatrix) -> np.ndarray:
    w = as_matrix(w, name="W")
    if w.shape != w_q.shape:
        raise ShapeError(f"W has shape {w.shape}, quantized W has {w_q.shape}")
    return dequantize(w_q) - w


def analytic_correction(eps, mean_x) -> np.ndarray:
    """``c[j] = sum_i eps[i, j] * E[x][i]``."""
    eps = as_matrix(eps, name="epsilon")
    mean_x = as_vector(mean_x, name="mean_x")
    if mean_x.shape[0] != eps.shape[0]:
        raise ShapeError(f"mean_x has length {mean_x.shape[0]}, W has {eps.shape[0]} input channels")
    return mean_x @ eps


def empirical_correction(w, w_tilde, samples) -> np.ndarray:
    """Mean of ``x @ W_tilde - x @ W`` over the rows of ``samples``."""
    w = as_matrix(w, name="W")
    w_tilde = as_matrix(w_tilde, name="W_tilde")
    samples = as_matrix(samples, name="samples")
    if w.shape != w_tilde.shape:
        raise ShapeError(f"W has shape {w.shape}, W_tilde has {w_tilde.shape}")
    if samples.shape[0] == 0:
        raise EmptyInputError("empirical correction needs at least one sample")
    if samples.shape[1] != w.shape[0]:
        raise ShapeError(f"samples have {samples.shape[1]} features, W has {w.shape[0]} rows")
    return (samples @ w_tilde - samples @ w).mean(axis=0)


def apply_correction(layer: LinearLayer, c) -> LinearLayer:
    c = as_vector(c, name="correction")
    if c.shape[0] != layer.out_dim:
        raise ShapeError(f"correction has length {c.shape[0]}, layer has {layer.out_dim} outputs")
    return layer.replace(bias=layer.bias - c)
