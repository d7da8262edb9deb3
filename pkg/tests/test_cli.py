import json

import numpy as np
import pytest

from aweq import serialization as ser
from aweq.cli import main
from aweq.layers import random_mlp
from aweq.metrics import evaluate
from aweq.model import synth_outlier_activations
from aweq.pipeline import QuantConfig, quantize_from_stats


@pytest.fixture
def workdir(tmp_path):
    model = random_mlp((8, 16, 4), seed=0)
    ser.write_model_spec(tmp_path / "model.json", model)
    x = synth_outlier_activations(300, 8, 1, 30.0, seed=1)
    ser.write_container(tmp_path / "data.awqt", {"x": x})
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def test_stats_constant_tensor(tmp_path):
    ser.write_container(tmp_path / "c.awqt", {"c": np.full((4, 3), 2.5, np.float32)})
    assert run("stats", tmp_path / "c.awqt", "--out", tmp_path / "s.json") == 0
    doc = json.loads((tmp_path / "s.json").read_text())["tensors"]["c"]
    assert doc["range"] == [0.0, 0.0, 0.0] and doc["tensor_range"] == 0.0


def test_stats_rows_axis(tmp_path):
    ser.write_container(tmp_path / "c.awqt", {"w": np.array([[0, 1, 2], [5, 5, 5]], np.float32)})
    assert run("stats", tmp_path / "c.awqt", "--axis", "rows", "--out", tmp_path / "s.json") == 0
    assert json.loads((tmp_path / "s.json").read_text())["tensors"]["w"]["range"] == [2.0, 0.0]


@pytest.mark.parametrize("flags", [["--no-awe", "--no-bc"], [], ["--abits", "0", "--wbits", "4"]])
def test_pipeline_matches_library(workdir, flags):
    w = workdir
    assert run("calibrate", w / "model.json", w / "data.awqt", "--out", w / "stats.awqt") == 0
    assert run("quantize", w / "model.json", w / "stats.awqt", "--calib", w / "data.awqt",
               "--wbits", 8, "--abits", 8, *flags, "--out", w / "q.json") == 0
    assert run("eval", w / "q.json", w / "model.json", w / "data.awqt", "--out", w / "eval.json") == 0

    model = ser.read_model_spec(w / "model.json")
    data = ser.read_matrix(w / "data.awqt")
    cfg = QuantConfig(
        weight_bits=4 if "4" in flags else 8,
        act_bits=None if "0" in flags else 8,
        enable_awe="--no-awe" not in flags,
        enable_bc="--no-bc" not in flags,
    )
    q = quantize_from_stats(model, ser.read_stats(w / "stats.awqt"), cfg, samples=data)
    expected = ser.dumps_json(evaluate(q, model, data).to_dict())
    assert (w / "eval.json").read_text() == expected


def test_run_config_file(workdir):
    w = workdir
    run("calibrate", w / "model.json", w / "data.awqt", "--out", w / "stats.awqt")
    (w / "run.json").write_text(json.dumps({
        "model": str(w / "model.json"), "stats": str(w / "stats.awqt"), "out": str(w / "q.json"), "weight_bits": 4,
    }))
    assert run("quantize", "--config", w / "run.json") == 0
    assert ser.read_qmodel(w / "q.json").config.weight_bits == 4


def test_equalize_writes_scales(workdir):
    w = workdir
    run("calibrate", w / "model.json", w / "data.awqt", "--out", w / "stats.awqt")
    assert run("equalize", w / "model.json", w / "stats.awqt", "--report", w / "r.json", "--out", w / "eq.json") == 0
    tensors = ser.read_container(ser.tensor_path(w / "eq.json"))
    assert {"layer0.eq_scale", "layer1.eq_scale"} <= set(tensors)
    report = json.loads((w / "r.json").read_text())
    assert report["placements"] == ["input", "folded"]
    for d in report["layers"]:
        assert d["objective_after"] >= d["objective_before"] - 1e-12


def test_unknown_flag_is_usage_error(workdir):
    assert run("quantize", "--bogus") == 1
    assert run("frobnicate") == 1
    assert run("quantize", "--wbits", "12", "--out", "x") == 1


def test_missing_positional_is_usage_error(workdir):
    assert run("quantize", "--out", workdir / "q.json") == 1


def test_validation_error_exit_code(workdir, capsys):
    w = workdir
    ser.write_container(w / "bad.awqt", {"x": np.ones((5, 3), np.float32)})
    assert run("calibrate", w / "model.json", w / "bad.awqt", "--out", w / "s.awqt") == 2
    (w / "junk.awqt").write_bytes(b"garbage")
    assert run("stats", w / "junk.awqt", "--out", w / "s.json") == 2
    assert "error" in capsys.readouterr().err


def test_unknown_config_key_exit_code(workdir):
    (workdir / "run.json").write_text(json.dumps({"bits": 4}))
    assert run("quantize", "--config", workdir / "run.json") == 2


def test_ablate_check_and_seed_env(workdir, monkeypatch):
    w = workdir
    code = run("ablate", w / "model.json", w / "data.awqt", "--seeds", 2, "--check", "--out", w / "a.json")
    assert code in (0, 3)
    doc = json.loads((w / "a.json").read_text())
    assert doc["seeds"] == [0, 1]
    assert set(doc["median_mse"]) == {"FP", "W8A8", "W8A8+BC", "W8A8+AWE", "AWEQ"}
    assert (code == 3) == bool(doc["violations"])

    monkeypatch.setenv("AWEQ_SEED", "5")
    run("ablate", w / "model.json", w / "data.awqt", "--seeds", 1, "--out", w / "b.json")
    run("ablate", w / "model.json", w / "data.awqt", "--seeds", 1, "--out", w / "c.json")
    assert json.loads((w / "b.json").read_text())["seeds"] == [5]
    assert (w / "b.json").read_bytes() == (w / "c.json").read_bytes()

    monkeypatch.setenv("AWEQ_SEED", "x")
    assert run("ablate", w / "model.json", w / "data.awqt", "--out", w / "d.json") == 1
