"""Error metrics between reference and quantized outputs, and model-level reports."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ShapeError
from .layers import ModelSpec
from .model import forward_fp
from .pipeline import QuantizedModel, forward_quant
from .tensor import as_matrix


@dataclass(frozen=True)
class Metrics:
    mse: float
    sqnr_db: float
    cosine: float
    max_abs_err: float

    def to_dict(self) -> dict:
        return asdict(self)


def compute_metrics(y_ref, y_q) -> Metrics:
    """MSE, SQNR in dB, flattened cosine similarity and max absolute error.

    SQNR is ``+inf`` when either the error or the reference power is zero.
    Cosine is 1 for two all-zero tensors and 0 when only one of them is zero.
    """
    y_ref = as_matrix(y_ref, name="Y_ref")
    y_q = as_matrix(y_q, name="Y_q")
    if y_ref.shape != y_q.shape:
        raise ShapeError(f"shape mismatch: {y_ref.shape} vs {y_q.shape}")
    err = y_q - y_ref
    mse = float(np.mean(err**2)) if err.size else 0.0
    sig = float(np.sum(y_ref**2))
    noise = float(np.sum(err**2))
    sqnr = math.inf if noise == 0 or sig == 0 else 10.0 * math.log10(sig / noise)
    a, b = y_ref.ravel(), y_q.ravel()
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0 and nb == 0:
        cos = 1.0
    elif na == 0 or nb == 0:
        cos = 0.0
    else:
        cos = float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))
    mae = float(np.max(np.abs(err))) if err.size else 0.0
    return Metrics(mse, sqnr, cos, mae)


@dataclass(frozen=True)
class EvalReport:
    end_to_end: Metrics
    layers: list[Metrics] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "end_to_end": self.end_to_end.to_dict(),
            "layers": [m.to_dict() for m in self.layers],
            "info": self.info,
        }


def evaluate(qmodel: QuantizedModel, model: ModelSpec, x) -> EvalReport:
    """Compare quantized inference against the FP model on ``x``."""
    y_ref, tr = forward_fp(model, x, trace=True)
    y_q, q_outs = forward_quant(qmodel, x, return_layers=True)
    if len(q_outs) != len(tr.outputs):
        raise ShapeError(f"quantized model has {len(q_outs)} layers, reference has {len(tr.outputs)}")
    per_layer = [compute_metrics(r, q) for r, q in zip(tr.outputs, q_outs)]
    info = dict(qmodel.info)
    info["eval_count"] = int(np.asarray(x).shape[0])
    return EvalReport(compute_metrics(y_ref, y_q), per_layer, info)
