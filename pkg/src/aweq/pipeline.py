"""End-to-end AWEQ: equalize, calibrate, quantize, correct.

``quantize_model`` takes raw calibration samples; ``quantize_from_stats``
is the same pipeline driven by precomputed channel statistics (what the
``quantize`` CLI subcommand sees). Without samples the bias correction falls
back to the analytic ``eps * E[x]`` form with FP upstream activations.

Every float tensor stored in a :class:`QuantizedModel` is rounded to
float32 so that a model written to a tensor container reads back
bit-identical. Arithmetic at inference time stays in float64.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .bias_correction import apply_correction, empirical_correction, analytic_correction
from .equalizer import SCALE_BOUNDS, compute_equalization_factors, equalization_diagnostics, fold_scale_into_previous
from .errors import InvalidInputError, ShapeError, ValidationError
from .layers import HOMOGENEOUS, LinearLayer, ModelSpec, apply_activation
from .model import calibrate, forward_fp
from .quantizer import QuantParams, check_bits, compute_quant_params, dequantize, quant_dequant, quantize
from .tensor import ROWS, ChannelStats, as_matrix, channel_stats

log = logging.getLogger(__name__)

BC_PROPAGATION = ("fp", "quantized")


@dataclass(frozen=True)
class QuantConfig:
    weight_bits: int | None = 8
    act_bits: int | None = 8
    enable_awe: bool = True
    enable_bc: bool = True
    symmetric: bool = False
    act_range_percentile: float | None = None
    bc_propagation: str = "quantized"
    fold_scales: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("weight_bits", "act_bits"):
            v = getattr(self, name)
            if v is not None:
                check_bits(v)
        p = self.act_range_percentile
        if p is not None and not 0.5 < p <= 1.0:
            raise InvalidInputError(f"act_range_percentile must lie in (0.5, 1], got {p}")
        if self.bc_propagation not in BC_PROPAGATION:
            raise InvalidInputError(f"bc_propagation must be one of {BC_PROPAGATION}, got {self.bc_propagation!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "QuantConfig":
        known = {f.name for f in fields(cls)}
        extra = sorted(set(d) - known)
        if extra:
            raise ValidationError(f"unknown config keys: {', '.join(extra)}")
        return cls(**d)

    def label(self) -> str:
        w = f"W{self.weight_bits}" if self.weight_bits else "W16"
        a = f"A{self.act_bits}" if self.act_bits else "A16"
        return w + a


@dataclass(frozen=True, eq=False)
class QuantizedLayer:
    """One layer of a quantized model.

    ``weight`` holds the values used at inference: the dequantized codes when
    ``codes`` is set, otherwise the float32-rounded equalized weight.
    ``output_scale`` is the scale folded into this layer's outputs by the
    next layer's equalization; multiplying by it recovers the original
    model's activations.
    """

    weight: np.ndarray
    bias: np.ndarray
    activation: str = "none"
    codes: np.ndarray | None = None
    weight_params: QuantParams | None = None
    act_params: QuantParams | None = None
    input_scale: np.ndarray | None = None
    output_scale: np.ndarray | None = None
    eq_scale: np.ndarray | None = None
    correction: np.ndarray | None = None

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]


@dataclass(frozen=True, eq=False)
class QuantizedModel:
    input_dim: int
    layers: list[QuantizedLayer]
    config: QuantConfig
    info: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class EqualizedModel:
    model: ModelSpec
    scales: list[np.ndarray]
    output_scales: list[np.ndarray | None]
    placements: list[str]
    diagnostics: list[dict]
    warnings: list[str]


def _f32(a):
    return None if a is None else np.asarray(a, dtype=np.float32).astype(np.float64)


def _range_summary(r: np.ndarray, big: float) -> dict:
    return {
        "min": float(r.min()),
        "median": float(np.median(r)),
        "max": float(r.max()),
        "tensor_range": float(big),
    }


def equalize_model(model: ModelSpec, stats: list[ChannelStats], *, x_ranges=None, fold: bool = True) -> EqualizedModel:
    """Equalize every linear layer's input, last layer first.

    With ``fold=True`` a scale is pushed into the previous layer's weight
    columns and bias whenever that layer's activation is positive-homogeneous;
    going back to front means layer ``k``'s weight already carries the column
    scaling from layer ``k + 1`` when its own row ranges are measured. The
    first layer, layers behind a GELU, and every layer when ``fold=False``
    get an explicit ``input_scale`` instead.

    ``x_ranges`` optionally replaces the per-channel activation ranges taken
    from ``stats`` (used by the percentile calibration mode).
    """
    if len(stats) != len(model.layers):
        raise ShapeError(f"got {len(stats)} stats for {len(model.layers)} layers")
    layers = list(model.layers)
    n = len(layers)
    scales: list = [None] * n
    out_scales: list = [None] * n
    placements: list = [None] * n
    diags: list = [None] * n
    warnings: list[str] = []
    for k in reversed(range(n)):
        layer = layers[k]
        if stats[k].channels != layer.in_dim:
            raise ShapeError(f"stats for layer {k} have {stats[k].channels} channels, layer expects {layer.in_dim}")
        r_x = stats[k].range if x_ranges is None else np.asarray(x_ranges[k], dtype=np.float64)
        w_stats = channel_stats(layer.weight, ROWS)
        s_raw = compute_equalization_factors(r_x, w_stats.range, clip=False)
        s = _f32(np.clip(s_raw, *SCALE_BOUNDS))
        d = equalization_diagnostics(stats[k], w_stats, s, s_raw)
        # "before" is measured against the untouched weight of the input model
        d["objective_before"] = equalization_diagnostics(
            stats[k], channel_stats(model.layers[k].weight, ROWS), s
        )["objective_before"]
        x_after = stats[k].scaled(s)
        w_after = channel_stats(layer.weight * s[:, None], ROWS)
        d["x_range_before"] = _range_summary(stats[k].range, stats[k].tensor_range())
        d["x_range_after"] = _range_summary(x_after.range, x_after.tensor_range())
        d["w_range_before"] = _range_summary(w_stats.range, w_stats.tensor_range())
        d["w_range_after"] = _range_summary(w_after.range, w_after.tensor_range())

        layer = layer.replace(weight=layer.weight * s[:, None])
        if fold and k > 0 and layers[k - 1].activation in HOMOGENEOUS:
            layers[k - 1] = fold_scale_into_previous(layers[k - 1], s)
            out_scales[k - 1] = s
            placements[k] = "folded"
        else:
            old = layer.input_scale
            layer = layer.replace(input_scale=s if old is None else old * s)
            placements[k] = "input" if k == 0 else "explicit"
            if fold and k > 0:
                msg = f"layer {k}: cannot fold through {layers[k - 1].activation!r}, using an explicit scale"
                log.warning(msg)
                warnings.append(msg)
        layers[k] = layer
        scales[k] = s
        d["placement"] = placements[k]
        diags[k] = d
    return EqualizedModel(ModelSpec(model.input_dim, layers), scales, out_scales, placements, diags, warnings)


def _percentile_ranges(inputs: list[np.ndarray], p: float) -> list[np.ndarray]:
    return [np.quantile(x, p, axis=0) - np.quantile(x, 1 - p, axis=0) for x in inputs]


def quantize_model(model: ModelSpec, calib, cfg: QuantConfig = QuantConfig()) -> QuantizedModel:
    """Run the full pipeline with ``calib`` samples as the calibration set."""
    calib = as_matrix(calib, name="calibration samples")
    return quantize_from_stats(model, calibrate(model, calib), cfg, samples=calib)


def quantize_from_stats(
    model: ModelSpec,
    stats: list[ChannelStats],
    cfg: QuantConfig = QuantConfig(),
    *,
    samples=None,
) -> QuantizedModel:
    if len(stats) != len(model.layers):
        raise ShapeError(f"got {len(stats)} stats for {len(model.layers)} layers")
    if samples is not None:
        samples = as_matrix(samples, name="calibration samples")
    elif cfg.act_range_percentile is not None:
        raise ValidationError("act_range_percentile needs calibration samples, not just statistics")
    warnings: list[str] = []
    n = len(model.layers)

    pct = cfg.act_range_percentile
    x_ranges = None
    if pct is not None:
        x_ranges = _percentile_ranges(forward_fp(model, samples, trace=True)[1].inputs, pct)

    # 1. equalization
    if cfg.enable_awe and n:
        eq = equalize_model(model, stats, x_ranges=x_ranges, fold=cfg.fold_scales)
        work = eq.model
        warnings += eq.warnings
    else:
        eq = None
        work = model

    # 2. statistics of the equalized activations
    eq_inputs = None
    if samples is not None:
        _, tr = forward_fp(work, samples, trace=True)
        eq_inputs = tr.inputs
        eq_stats = calibrate(work, samples)
    elif eq is not None:
        eq_stats = [st.scaled(s) for st, s in zip(stats, eq.scales)]
    else:
        eq_stats = list(stats)

    # 3. + 4. static activation ranges and weight codes
    qlayers = []
    for k, layer in enumerate(work.layers):
        act_params = None
        if cfg.act_bits is not None:
            if pct is not None:
                lo, hi = np.quantile(eq_inputs[k], 1 - pct), np.quantile(eq_inputs[k], pct)
            else:
                lo, hi = eq_stats[k].min.min(), eq_stats[k].max.max()
            act_params = compute_quant_params(lo, hi, cfg.act_bits, symmetric=cfg.symmetric)
        codes = wp = None
        if cfg.weight_bits is not None:
            w = layer.weight
            wp = compute_quant_params(w.min(), w.max(), cfg.weight_bits, symmetric=cfg.symmetric)
            qm = quantize(w, wp)
            codes, w_used = qm.codes, dequantize(qm)
        else:
            w_used = _f32(layer.weight)
        qlayers.append(
            QuantizedLayer(
                weight=w_used,
                bias=_f32(layer.bias),
                activation=layer.activation,
                codes=codes,
                weight_params=wp,
                act_params=act_params,
                input_scale=_f32(layer.input_scale),
                output_scale=None if eq is None else eq.output_scales[k],
                eq_scale=None if eq is None else eq.scales[k],
            )
        )

    # 5. bias correction
    bc_source = bc_prop = None
    if cfg.enable_bc and cfg.weight_bits is not None and n:
        bc_prop = cfg.bc_propagation
        if bc_prop == "quantized" and samples is None:
            msg = "bias correction: no calibration samples, falling back to fp propagation"
            log.warning(msg)
            warnings.append(msg)
            bc_prop = "fp"
        bc_source = "empirical" if samples is not None else "analytic"
        x = samples
        for k, (layer, ql) in enumerate(zip(work.layers, qlayers)):
            if bc_prop == "quantized":
                x_eff = layer.effective_input(x)
                if ql.act_params is not None:
                    x_eff = quant_dequant(x_eff, ql.act_params)
            else:
                x_eff = None if eq_inputs is None else eq_inputs[k]
            if x_eff is not None:
                c = empirical_correction(layer.weight, ql.weight, x_eff)
            else:
                c = analytic_correction(ql.weight - layer.weight, eq_stats[k].mean)
            corrected = apply_correction(layer, c)
            ql = _replace(ql, bias=_f32(corrected.bias), correction=_f32(c))
            qlayers[k] = ql
            if bc_prop == "quantized":
                x = apply_activation(x_eff @ ql.weight + ql.bias, ql.activation)

    info = {
        "config": cfg.to_dict(),
        "calibration_count": int(stats[0].count) if n else 0,
        "bc_source": bc_source,
        "bc_propagation": bc_prop,
        "warnings": warnings,
        "layers": [] if eq is None else eq.diagnostics,
    }
    return QuantizedModel(model.input_dim, qlayers, cfg, info)


def _replace(ql: QuantizedLayer, **changes) -> QuantizedLayer:
    d = {f.name: getattr(ql, f.name) for f in fields(ql)}
    d.update(changes)
    return QuantizedLayer(**d)


def forward_quant(qmodel: QuantizedModel, x, *, return_layers: bool = False):
    """Fake-quantized inference.

    With ``return_layers=True`` also returns every layer's output mapped
    back to the coordinates of the un-equalized model.
    """
    x = as_matrix(x, name="X")
    if x.shape[1] != qmodel.input_dim:
        raise ShapeError(f"X has {x.shape[1]} features, model expects {qmodel.input_dim}")
    outs = []
    for ql in qmodel.layers:
        if ql.input_scale is not None:
            x = x / ql.input_scale
        if ql.act_params is not None:
            x = quant_dequant(x, ql.act_params)
        x = apply_activation(x @ ql.weight + ql.bias, ql.activation)
        if return_layers:
            outs.append(x if ql.output_scale is None else x * ql.output_scale)
    return (x, outs) if return_layers else x
