import json
import time
from importlib import resources

import numpy as np
import pytest

from zowarmup import cli
from zowarmup.config import load_config
from zowarmup.fed import run_zowarmup
from zowarmup.metrics import read_jsonl

SMOKE = resources.files("zowarmup") / "configs" / "smoke.cfg"


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def test_smoke_run_writes_all_outputs(tmp_path):
    started = time.perf_counter()
    assert run_cli("run", SMOKE, "--output-dir", tmp_path) == 0
    assert time.perf_counter() - started < 10
    records = read_jsonl(tmp_path / "metrics.jsonl")
    assert len(records) == 10
    assert [r.round_index for r in records] == list(range(10))
    report = json.loads((tmp_path / "cost_report.json").read_text())
    assert report["zero_order"]["uplink_bytes_per_client"] == 12
    assert report["measured"]["rounds"] == 10
    weights = np.load(tmp_path / "final_weights.npy")
    expected = run_zowarmup(load_config(SMOKE).experiment)
    assert weights.tobytes() == expected.weights.tobytes()
    assert (tmp_path / "curve.csv").read_text().count("\n") == 11


def test_replay_is_byte_identical(tmp_path):
    assert run_cli("run", SMOKE, "--output-dir", tmp_path / "a") == 0
    assert run_cli("run", SMOKE, "--output-dir", tmp_path / "b") == 0
    for name in ("metrics.jsonl", "curve.csv", "cost_report.json", "final_weights.npy"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("ZOWARMUP_OUTPUT_DIR", str(tmp_path / "env"))
    assert run_cli("run", SMOKE) == 0
    assert (tmp_path / "env" / "metrics.jsonl").exists()


def test_missing_config_exits_2(tmp_path, capsys):
    assert run_cli("run", tmp_path / "absent.cfg") == 2
    assert "not found" in capsys.readouterr().err


def test_malformed_config_exits_2_with_location(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("pivot = 3\nlearning_rate = 0.1\n")
    assert run_cli("run", cfg, "--output-dir", tmp_path) == 2
    assert "line 2, field 'learning_rate'" in capsys.readouterr().err


def test_divergence_exits_3_with_round(tmp_path, capsys):
    cfg = tmp_path / "div.cfg"
    cfg.write_text(SMOKE.read_text() + "eta_c_zo = 1e300\n")
    assert run_cli("run", cfg, "--output-dir", tmp_path) == 3
    assert "round 5" in capsys.readouterr().err
    # rounds before the failure are already on disk
    assert len(read_jsonl(tmp_path / "metrics.jsonl")) == 5


def test_single_value_sweep_equals_one_run(tmp_path):
    assert run_cli("sweep", SMOKE, "--axis", "pivot", "--values", "5", "--seeds", "1",
                   "--output-dir", tmp_path) == 0
    header, row = (tmp_path / "sweep_pivot.csv").read_text().splitlines()
    assert header.startswith("pivot,mean_accuracy")
    expected = run_zowarmup(load_config(SMOKE).experiment).final_accuracy
    assert float(row.split(",")[1]) == expected


@pytest.mark.parametrize("axis, values", [
    ("S", ["1", "3"]), ("tau", ["0.5", "1.0"]), ("split", ["25/75", "0.5"]),
    ("grad_steps", ["1", "2"]), ("distribution", ["gaussian", "Rademacher"]),
])
def test_sweep_axes(tmp_path, axis, values, capsys):
    assert run_cli("sweep", SMOKE, "--axis", axis, "--values", *values, "--seeds", "2",
                   "--output-dir", tmp_path) == 0
    lines = (tmp_path / f"sweep_{axis}.csv").read_text().splitlines()
    assert len(lines) == 3
    assert "accuracy %" in capsys.readouterr().out


def test_sweep_rejects_bad_value(tmp_path):
    assert run_cli("sweep", SMOKE, "--axis", "distribution", "--values", "uniform",
                   "--output-dir", tmp_path) == 2


def test_grid_reports_best_cell(tmp_path, capsys):
    assert run_cli("grid", SMOKE, "--params", "eta_s_zo", "--output-dir", tmp_path) == 0
    assert "best cell over 4" in capsys.readouterr().out
    assert len((tmp_path / "grid.csv").read_text().splitlines()) == 5


def test_cost_command(tmp_path, capsys):
    desc = tmp_path / "mlp.json"
    desc.write_text(json.dumps({"param_count": 6, "layer_outputs": [[2, 1, 1]]}))
    assert run_cli("cost", desc, "--batch-size", "1", "--output", tmp_path / "out.json") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["first_order"]["peak_memory_bytes_per_client"] == 56
    assert report["first_order"]["uplink_bytes_per_client"] == 24
    assert json.loads((tmp_path / "out.json").read_text()) == report


def test_cost_command_errors(tmp_path):
    assert run_cli("cost", tmp_path / "absent.json") == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_cli("cost", bad) == 2
