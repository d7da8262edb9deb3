"""Command-line entry point: ``aweq <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 validation or format error,
3 ordering violation reported by ``ablate --check``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import ablation, serialization as ser
from .errors import AWEQError
from .metrics import evaluate
from .model import calibrate
from .pipeline import QuantConfig, equalize_model, quantize_from_stats
from .tensor import channel_stats

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_CHECK = 0, 1, 2, 3

log = logging.getLogger("aweq")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _cmd_stats(args) -> int:
    out = {"axis": args.axis, "tensors": {}}
    for name, arr in ser.read_container(args.container).items():
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2 or arr.size == 0:
            raise ser.ValidationError(f"{name!r}: stats needs a non-empty 1-D or 2-D tensor, got shape {arr.shape}")
        st = channel_stats(arr, args.axis)
        out["tensors"][name] = {
            "channels": st.channels,
            "count": st.count,
            "min": st.min,
            "max": st.max,
            "range": st.range,
            "mean": st.mean,
            "tensor_range": st.tensor_range(),
        }
    ser.write_json(args.out, out)
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    model = ser.read_model_spec(args.model)
    data = ser.read_matrix(args.data, args.name)
    ser.write_stats(args.out, calibrate(model, data, batch_size=args.batch_size))
    return EXIT_OK


def _cmd_equalize(args) -> int:
    model = ser.read_model_spec(args.model)
    stats = ser.read_stats(args.stats)
    eq = equalize_model(model, stats, fold=not args.no_fold)
    scales = {f"layer{k}.eq_scale": s for k, s in enumerate(eq.scales)}
    ser.write_model_spec(args.out, eq.model, extra_tensors=scales)
    report = {"placements": eq.placements, "layers": eq.diagnostics, "scales": eq.scales, "warnings": eq.warnings}
    if args.report:
        ser.write_json(args.report, report)
    else:
        sys.stdout.write(ser.dumps_json({"placements": eq.placements, "layers": eq.diagnostics}))
    return EXIT_OK


def _seed_override(cfg: QuantConfig) -> QuantConfig:
    env = os.environ.get("AWEQ_SEED")
    if env is None:
        return cfg
    try:
        return replace(cfg, seed=int(env))
    except ValueError as exc:
        raise UsageError(f"AWEQ_SEED must be an integer, got {env!r}") from exc


def _build_config(args) -> tuple[QuantConfig, dict]:
    cfg, paths = (QuantConfig(), {}) if args.config is None else ser.load_run_config(args.config)
    changes = {}
    if args.wbits is not None:
        changes["weight_bits"] = args.wbits
    if args.abits is not None:
        changes["act_bits"] = None if args.abits == 0 else args.abits
    if args.symmetric:
        changes["symmetric"] = True
    if args.no_awe:
        changes["enable_awe"] = False
    if args.no_bc:
        changes["enable_bc"] = False
    if args.fold:
        changes["fold_scales"] = True
    if args.percentile is not None:
        changes["act_range_percentile"] = args.percentile
    if args.bc_propagation is not None:
        changes["bc_propagation"] = args.bc_propagation
    if args.seed is not None:
        changes["seed"] = args.seed
    return _seed_override(replace(cfg, **changes)), paths


def _need(value, key: str, paths: dict, what: str):
    value = value if value is not None else paths.get(key)
    if value is None:
        raise UsageError(f"missing {what} (positional argument or '{key}' in --config)")
    return value


def _cmd_quantize(args) -> int:
    cfg, paths = _build_config(args)
    model = ser.read_model_spec(_need(args.model, "model", paths, "model"))
    stats = ser.read_stats(_need(args.stats, "stats", paths, "statistics"))
    calib = args.calib or paths.get("calib")
    samples = None if calib is None else ser.read_matrix(calib)
    qmodel = quantize_from_stats(model, stats, cfg, samples=samples)
    ser.write_qmodel(_need(args.out, "out", paths, "--out"), qmodel)
    return EXIT_OK


def _cmd_eval(args) -> int:
    qmodel = ser.read_qmodel(args.qmodel)
    model = ser.read_model_spec(args.model)
    data = ser.read_matrix(args.data, args.name)
    ser.write_json(args.out, evaluate(qmodel, model, data).to_dict())
    return EXIT_OK


def ablate_split(data: np.ndarray, seed: int, calib_size: int | None):
    """Shuffle rows with ``seed`` and split into calibration and evaluation sets."""
    n = data.shape[0]
    if n < 2:
        raise ser.ValidationError("ablation data needs at least two rows")
    k = min(ablation.DEFAULT_CALIB, n // 2) if calib_size is None else calib_size
    if not 1 <= k < n:
        raise ser.ValidationError(f"calibration size {k} must lie in [1, {n - 1}]")
    perm = np.random.default_rng(seed).permutation(n)
    return data[perm[:k]], data[perm[k:]]


def run_cli_ablation(model, data, cfg: QuantConfig, seeds: int, calib_size: int | None = None) -> dict:
    bits = (cfg.weight_bits, cfg.act_bits)
    tables = []
    for seed in range(cfg.seed, cfg.seed + seeds):
        calib, ev = ablate_split(data, seed, calib_size)
        tables.append(ablation.run_ablation(model, calib, ev, bits, replace(cfg, seed=seed)))
    medians = ablation.median_mse(tables)
    return {
        "config": cfg.to_dict(),
        "seeds": list(range(cfg.seed, cfg.seed + seeds)),
        "median_mse": medians,
        "violations": ablation.check_ordering(medians, bits),
        "tables": [t.to_dict() for t in tables],
    }


def _cmd_ablate(args) -> int:
    cfg, paths = _build_config(args)
    if args.seeds < 1:
        raise UsageError("--seeds must be at least 1")
    model = ser.read_model_spec(_need(args.model, "model", paths, "model"))
    data = ser.read_matrix(_need(args.data, "data", paths, "data"))
    result = run_cli_ablation(model, data, cfg, args.seeds, args.calib_size)
    ser.write_json(_need(args.out, "out", paths, "--out"), result)
    if args.check and result["violations"]:
        for v in result["violations"]:
            log.error("check failed: %s", v)
        return EXIT_CHECK
    return EXIT_OK


def _bits(text: str) -> int:
    v = int(text)
    if not 2 <= v <= 8:
        raise argparse.ArgumentTypeError("bit-width must be in [2, 8]")
    return v


def _abits(text: str) -> int:
    v = int(text)
    if v != 0 and not 2 <= v <= 8:
        raise argparse.ArgumentTypeError("activation bit-width must be 0 (float) or in [2, 8]")
    return v


def _quant_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration (strict keys)")
    p.add_argument("--wbits", type=_bits, help="weight bit-width")
    p.add_argument("--abits", type=_abits, help="activation bit-width, 0 keeps activations in float")
    p.add_argument("--symmetric", action="store_true", help="symmetric grid with a fixed mid-range zero point")
    p.add_argument("--no-awe", action="store_true", help="skip activation-weight equalization")
    p.add_argument("--no-bc", action="store_true", help="skip bias correction")
    p.add_argument("--fold", action="store_true", help="fold scales into the previous layer's weights")
    p.add_argument("--percentile", type=float, help="clip calibration ranges at this percentile")
    p.add_argument("--bc-propagation", choices=("fp", "quantized"))
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aweq", description="AWEQ post-training quantization toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", help="per-channel range summaries of every tensor in a container")
    p.add_argument("container")
    p.add_argument("--axis", choices=("cols", "rows"), default="cols")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("calibrate", help="collect per-layer input statistics")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--name", help="tensor to read from the data container (default: first)")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("equalize", help="compute equalization scales and write the equalized FP model")
    p.add_argument("model")
    p.add_argument("stats")
    p.add_argument("--no-fold", action="store_true", help="keep every scale as an explicit input scale")
    p.add_argument("--report", help="write scales and objective values here instead of stdout")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_equalize)

    p = sub.add_parser("quantize", help="equalize, quantize and bias-correct a model")
    p.add_argument("model", nargs="?")
    p.add_argument("stats", nargs="?")
    p.add_argument("--calib", help="calibration samples; enables empirical bias correction")
    p.add_argument("--out")
    _quant_flags(p)
    p.set_defaults(func=_cmd_quantize)

    p = sub.add_parser("eval", help="compare a quantized model against its FP reference")
    p.add_argument("qmodel")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--name", help="tensor to read from the data container (default: first)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="base / +BC / +AWE / AWEQ ablation over several seeds")
    p.add_argument("model", nargs="?")
    p.add_argument("data", nargs="?")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--calib-size", type=int)
    p.add_argument("--check", action="store_true", help="exit 3 unless median MSE satisfies AWEQ <= +AWE <= base")
    p.add_argument("--out")
    _quant_flags(p)
    p.set_defaults(func=_cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"aweq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AWEQError, OSError, ValueError, KeyError) as exc:
        print(f"aweq: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
