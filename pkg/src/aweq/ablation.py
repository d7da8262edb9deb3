"""Ablation over equalization and bias correction on desk-scale MLPs.

Rows follow the usual layout: FP reference, plain ``WnAm``, ``+BC``,
``+AWE``, and both together (AWEQ). Every row sees the same model,
calibration set and evaluation set.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .layers import ModelSpec, random_mlp
from .metrics import EvalReport, compute_metrics, evaluate
from .model import forward_fp, synth_outlier_activations
from .pipeline import QuantConfig, quantize_model

DEFAULT_DIMS = (64, 256, 256, 64)
DEFAULT_CALIB = 512
DEFAULT_EVAL = 512


@dataclass(frozen=True)
class AblationRow:
    name: str
    awe: bool | None
    bc: bool | None
    report: EvalReport

    def to_dict(self) -> dict:
        return {"name": self.name, "awe": self.awe, "bc": self.bc, **self.report.to_dict()}


@dataclass(frozen=True)
class AblationTable:
    rows: list[AblationRow]
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> AblationRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def mse(self) -> dict[str, float]:
        return {row.name: row.report.end_to_end.mse for row in self.rows}

    def to_dict(self) -> dict:
        return {"meta": self.meta, "rows": [r.to_dict() for r in self.rows]}


def row_names(bits=(8, 8)) -> list[str]:
    base = QuantConfig(weight_bits=bits[0], act_bits=bits[1]).label()
    return ["FP", base, base + "+BC", base + "+AWE", "AWEQ"]


def run_ablation(model: ModelSpec, calib, eval_x, bits=(8, 8), base: QuantConfig | None = None) -> AblationTable:
    base = replace(base or QuantConfig(), weight_bits=bits[0], act_bits=bits[1])
    names = row_names(bits)
    y_ref = forward_fp(model, eval_x)
    fp_report = EvalReport(compute_metrics(y_ref, y_ref), info={"config": None})
    rows = [AblationRow(names[0], None, None, fp_report)]
    for name, awe, bc in zip(names[1:], (False, False, True, True), (False, True, False, True)):
        cfg = replace(base, enable_awe=awe, enable_bc=bc)
        rows.append(AblationRow(name, awe, bc, evaluate(quantize_model(model, calib, cfg), model, eval_x)))
    meta = {
        "bits": list(bits),
        "calibration_count": int(np.asarray(calib).shape[0]),
        "eval_count": int(np.asarray(eval_x).shape[0]),
        "seed": base.seed,
    }
    return AblationTable(rows, meta)


def outlier_benchmark(
    seed: int,
    *,
    dims=DEFAULT_DIMS,
    outlier_channels: int = 1,
    magnitude: float = 50.0,
    n_calib: int = DEFAULT_CALIB,
    n_eval: int = DEFAULT_EVAL,
):
    """Random ReLU MLP plus calibration and evaluation sets with outlier input channels.

    Calibration and evaluation rows come from one draw so they share the
    same outlier channels.
    """
    model = random_mlp(dims, seed=seed)
    data = synth_outlier_activations(n_calib + n_eval, dims[0], outlier_channels, magnitude, seed=seed + 1_000_003)
    return model, data[:n_calib], data[n_calib:]


def run_benchmark(seeds, bits=(8, 8), base: QuantConfig | None = None, **bench_kw) -> list[AblationTable]:
    tables = []
    for seed in seeds:
        model, calib, ev = outlier_benchmark(seed, **bench_kw)
        cfg = replace(base or QuantConfig(), seed=int(seed))
        tables.append(run_ablation(model, calib, ev, bits, cfg))
    return tables


def median_mse(tables: list[AblationTable]) -> dict[str, float]:
    names = [r.name for r in tables[0].rows]
    return {n: float(np.median([t.mse()[n] for t in tables])) for n in names}


def check_ordering(medians: dict[str, float], bits=(8, 8)) -> list[str]:
    """Violations of ``AWEQ <= +AWE <= base`` on median MSE."""
    _, base, _, awe, aweq = row_names(bits)
    problems = []
    if not medians[aweq] <= medians[awe]:
        problems.append(f"median MSE AWEQ {medians[aweq]:.6g} > {awe} {medians[awe]:.6g}")
    if not medians[awe] <= medians[base]:
        problems.append(f"median MSE {awe} {medians[awe]:.6g} > {base} {medians[base]:.6g}")
    return problems
