import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from imudeskew import io
from imudeskew.cli import main, read_bundle
from imudeskew.config import EXAMPLE

HERE = Path(__file__).parent

STATIONARY = {"  kind: straight_then_turn\n  duration: 1.0\n  speed: 1.0\n  turn_rate: 1.5\n  switch_time: 0.5\n":
              "  kind: stationary\n  duration: 1.0\n"}
CONSTANT_VELOCITY = {"  kind: straight_then_turn\n  duration: 1.0\n  speed: 1.0\n  turn_rate: 1.5\n  switch_time: 0.5\n":
                     "  kind: constant_velocity\n  duration: 1.0\n  velocity: [1.0, 0.3, 0.0]\n"}


def write_config(tmp_path, changes=None, name="cfg.yaml", **fields):
    text = EXAMPLE
    for old, new in (changes or {}).items():
        assert old in text
        text = text.replace(old, new)
    for key, value in fields.items():
        lines = [f"{key}: {value}" if line.startswith(f"{key}:") else line for line in text.splitlines()]
        text = "\n".join(lines) + "\n"
    path = tmp_path / name
    path.write_text(text)
    return path


def run(*argv):
    return main([str(a) for a in argv])


def test_simulate_stationary(tmp_path, capsys):
    cfg = write_config(tmp_path, STATIONARY, rays=500)
    assert run("simulate", "--config", cfg, "--out", tmp_path / "b") == 0
    manifest = json.loads(capsys.readouterr().out)
    assert len(manifest["sweeps"]) == 2
    for entry in manifest["sweeps"]:
        a = (tmp_path / "b" / entry["sweep"]).read_bytes()
        b = (tmp_path / "b" / entry["truth"]).read_bytes()
        assert a == b
        assert abs(entry["imu_samples"] - 80) <= 1
    for name, digest in manifest["files"].items():
        assert io.sha256(tmp_path / "b" / name) == digest


def test_simulate_deterministic(tmp_path, capsys):
    cfg = write_config(tmp_path, rays=500, range_noise_std=0.01)
    run("simulate", "--config", cfg, "--out", tmp_path / "a", "--seed", 3)
    run("simulate", "--config", cfg, "--out", tmp_path / "b", "--seed", 3)
    run("simulate", "--config", cfg, "--out", tmp_path / "c", "--seed", 4)
    a, b, c = (json.loads((tmp_path / d / "manifest.json").read_text()) for d in "abc")
    assert a["files"] == b["files"]
    assert a["files"]["sweep_0000.csv"] != c["files"]["sweep_0000.csv"]


def test_bundle_round_trip(tmp_path):
    cfg = write_config(tmp_path, rays=300)
    run("simulate", "--config", cfg, "--out", tmp_path / "b")
    manifest, imu, sweeps, anchors = read_bundle(tmp_path / "b")
    assert len(sweeps) == 2 and set(anchors) == {0, 1}
    assert len(imu) == 401


def test_deskew_stationary_is_identity(tmp_path):
    cfg = write_config(tmp_path, STATIONARY, rays=400)
    run("simulate", "--config", cfg, "--out", tmp_path / "b")
    for method in ("proposed", "baseline"):
        assert run("deskew", tmp_path / "b", "--method", method, "--out", tmp_path / method) == 0
        for k in range(2):
            out = io.read_sweep(tmp_path / method / f"deskewed_{k:04d}.csv").points
            inp = io.read_sweep(tmp_path / "b" / f"sweep_{k:04d}.csv").points
            assert np.max(np.abs(out - inp)) < 1e-10


@pytest.mark.parametrize("mode", ["snap", "fractional"])
def test_baseline_equals_proposed_on_constant_velocity(tmp_path, mode):
    cfg = write_config(tmp_path, CONSTANT_VELOCITY, rays=400, deskew_mode=mode)
    run("simulate", "--config", cfg, "--out", tmp_path / "b")
    for method in ("proposed", "baseline"):
        run("deskew", tmp_path / "b", "--method", method, "--mode", mode, "--out", tmp_path / method)
    for k in range(2):
        a = io.read_sweep(tmp_path / "proposed" / f"deskewed_{k:04d}.csv").points
        b = io.read_sweep(tmp_path / "baseline" / f"deskewed_{k:04d}.csv").points
        assert np.max(np.abs(a - b)) < 1e-10


def test_deskew_with_config_override(tmp_path):
    cfg = write_config(tmp_path, rays=300)
    run("simulate", "--config", cfg, "--out", tmp_path / "b")
    assert run("deskew", tmp_path / "b", "--config", cfg, "--out", tmp_path / "d") == 0
    meta = json.loads((tmp_path / "d" / "deskew.json").read_text())
    assert meta["method"] == "proposed" and meta["mode"] == "fractional"


def test_missing_coverage_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, rays=300)
    run("simulate", "--config", cfg, "--out", tmp_path / "b")
    imu = (tmp_path / "b" / "imu.csv").read_text().splitlines()
    (tmp_path / "b" / "imu.csv").write_text("\n".join(imu[:300]) + "\n")
    assert run("deskew", tmp_path / "b", "--out", tmp_path / "d") == 5
    err = capsys.readouterr().err
    assert "ImuCoverageGap" in err and "sweep 1" in err


def test_format_error_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, rays=300)
    run("simulate", "--config", cfg, "--out", tmp_path / "b")
    lines = (tmp_path / "b" / "sweep_0001.csv").read_text().splitlines()
    lines[5] = "0.5,1.0,oops,2.0"
    (tmp_path / "b" / "sweep_0001.csv").write_text("\n".join(lines) + "\n")
    assert run("deskew", tmp_path / "b", "--out", tmp_path / "d") == 9
    assert "record 5" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, imu_rate="20.0")
    assert run("simulate", "--config", cfg, "--out", tmp_path / "b") == 8
    assert "line 2" in capsys.readouterr().err


def test_missing_bundle_exit_code(tmp_path):
    assert run("deskew", tmp_path / "nothing", "--out", tmp_path / "d") == 9


def test_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["deskew", "x", "--method", "other"])
    assert info.value.code == 2


def test_evaluate_identical_is_zero(tmp_path):
    cfg = write_config(tmp_path, rays=300)
    run("simulate", "--config", cfg, "--out", tmp_path / "b")
    t = tmp_path / "b" / "truth_0000.csv"
    assert run("evaluate", t, t, "--out", tmp_path / "r.txt") == 0
    assert io.read_report(tmp_path / "r.txt")["overall.rmse"] == 0.0


def test_evaluate_matches_independent_recomputation(tmp_path):
    cfg = write_config(tmp_path, rays=2000, imu_sampling="instant", deskew_mode="snap")
    run("simulate", "--config", cfg, "--out", tmp_path / "b")
    run("deskew", tmp_path / "b", "--out", tmp_path / "d")
    run("evaluate", tmp_path / "d", tmp_path / "b", "--out", tmp_path / "r.txt")
    report = io.read_report(tmp_path / "r.txt")
    assert report["method"] == "proposed" and report["sweeps"] == 2
    for k in range(2):
        out = subprocess.run(
            [sys.executable, HERE / "recompute_report.py", tmp_path / "d" / f"deskewed_{k:04d}.csv",
             tmp_path / "b" / f"truth_{k:04d}.csv"],
            capture_output=True, text=True, check=True,
        ).stdout
        ref = {key: float(v) for key, v in (line.split() for line in out.splitlines())}
        assert report[f"sweep.{k}.rmse"] > 0
        for key in ("rmse", "mean", "max", "count"):
            assert abs(report[f"sweep.{k}.{key}"] - ref[key]) < 1e-12


def test_evaluate_improvement_percentage(tmp_path):
    cfg = write_config(tmp_path, rays=1000)
    run("simulate", "--config", cfg, "--out", tmp_path / "b")
    for method in ("proposed", "baseline"):
        run("deskew", tmp_path / "b", "--method", method, "--out", tmp_path / method)
    run("evaluate", tmp_path / "baseline", tmp_path / "b", "--out", tmp_path / "base.txt")
    run("evaluate", tmp_path / "proposed", tmp_path / "b", "--reference", tmp_path / "base.txt",
        "--out", tmp_path / "prop.txt")
    base, prop = io.read_report(tmp_path / "base.txt"), io.read_report(tmp_path / "prop.txt")
    expected = (base["overall.rmse"] - prop["overall.rmse"]) / base["overall.rmse"] * 100
    assert prop["improvement_percent"] == expected
    assert base["method"] == "baseline"


def test_evaluate_cardinality_mismatch(tmp_path):
    io.write_sweep(tmp_path / "a.csv", [0.0, 1.0], np.zeros((2, 3)))
    io.write_sweep(tmp_path / "b.csv", [0.0], np.zeros((1, 3)))
    assert run("evaluate", tmp_path / "a.csv", tmp_path / "b.csv", "--out", tmp_path / "r.txt") == 6


def test_compare_stationary_single_run(tmp_path):
    cfg = write_config(tmp_path, STATIONARY, rays=400, runs=1)
    assert run("compare", "--config", cfg, "--out", tmp_path / "c") == 0
    r = io.read_report(tmp_path / "c" / "compare_report.txt")
    # gravity terms cancel analytically; what remains is summation round-off
    assert r["proposed.rmse_mean"] < 1e-12 and r["baseline.rmse_mean"] < 1e-12
    data = io.read_table(tmp_path / "c" / "error_vs_time.csv",
                         ("run", "sweep", "point", "time_offset", "error_proposed", "error_baseline"))
    assert data.shape[0] == 800


def test_compare_turn_and_determinism(tmp_path):
    cfg = write_config(tmp_path, rays=1000, runs=5, imu_sampling="instant", deskew_mode="snap")
    run("compare", "--config", cfg, "--out", tmp_path / "c1")
    run("compare", "--config", cfg, "--out", tmp_path / "c2")
    a = (tmp_path / "c1" / "compare_report.txt").read_bytes()
    assert a == (tmp_path / "c2" / "compare_report.txt").read_bytes()
    assert (tmp_path / "c1" / "error_vs_time.csv").read_bytes() == (tmp_path / "c2" / "error_vs_time.csv").read_bytes()
    r = io.read_report(tmp_path / "c1" / "compare_report.txt")
    assert r["proposed.rmse_mean"] < r["baseline.rmse_mean"]
    assert r["runs"] == 5 and r["master_seed"] == 7


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "imudeskew", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "imudeskew" in out.stdout
