"""Round trip through the on-disk formats and the command-line tool.

Writes a model and data to a temporary directory, runs
calibrate -> quantize -> eval through the CLI entry point, and checks the
report matches the same computation done in-process.
"""

import tempfile
from pathlib import Path

from aweq import QuantConfig, evaluate, outlier_benchmark, quantize_from_stats
from aweq import serialization as ser
from aweq.cli import main

model, calib, ev = outlier_benchmark(0, n_calib=256, n_eval=256)

with tempfile.TemporaryDirectory() as tmp:
    d = Path(tmp)
    ser.write_model_spec(d / "model.json", model)
    ser.write_container(d / "calib.awqt", {"x": calib})
    ser.write_container(d / "eval.awqt", {"x": ev})
    print("container sizes:", {p.name: p.stat().st_size for p in sorted(d.iterdir())})

    for argv in (
        ["calibrate", d / "model.json", d / "calib.awqt", "--out", d / "stats.awqt"],
        ["quantize", d / "model.json", d / "stats.awqt", "--calib", d / "calib.awqt", "--out", d / "q.json"],
        ["eval", d / "q.json", d / "model.json", d / "eval.awqt", "--out", d / "report.json"],
    ):
        print("aweq", argv[0], "->", main([str(a) for a in argv]))

    m = ser.read_model_spec(d / "model.json")
    q = quantize_from_stats(m, ser.read_stats(d / "stats.awqt"), QuantConfig(), samples=ser.read_matrix(d / "calib.awqt"))
    lib = ser.dumps_json(evaluate(q, m, ser.read_matrix(d / "eval.awqt")).to_dict())
    print("CLI report identical to library:", (d / "report.json").read_text() == lib)
