import csv
import json
import subprocess
import sys

import pytest

from fraccontain import cli
from fraccontain.errors import DivergenceError
from fraccontain.scenario import config_hash, load_scenario, preset_karate, save_scenario

SHORT = ["--horizon", "0.5"]


def _read(path):
    return path.read_bytes()


def test_simulate_writes_everything(tmp_path, capsys):
    out = tmp_path / "run"
    code = cli.main(["simulate", "--preset", "karate", "--alpha", "0.5", "--seed", "7", "--out", str(out), *SHORT])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["connectivity_preserved"] is True and report["complete"] is True
    assert report["scenario_id"] == "karate-standin"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["exit_status"] == 0 and manifest["config_hash"] == config_hash(load_scenario(out / "config.json"))
    with open(out / "trajectory.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:3] == ["t", "q1_follower_x1", "q1_follower_x2"]
    assert "q8_leader_x1" in rows[0] and "b_1_8" in rows[0]
    assert len(rows) == 1 + 501
    with open(out / "series" / "hull_volume.csv") as fh:
        series = list(csv.reader(fh))
    assert series[0] == ["t", "hull_volume"] and len(series) == 502
    assert "connectivity_preserved=True" in capsys.readouterr().out


def test_simulate_is_byte_deterministic(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["simulate", "--alpha", "0.8", "--seed", "3", "--out", str(out), *SHORT]) == 0
        outs.append(out)
    for f in ("trajectory.csv", "report.json", "config.json", "series/spread_x1.csv"):
        assert _read(outs[0] / f) == _read(outs[1] / f)


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "k.json"
    save_scenario(preset_karate(2), path)
    out = tmp_path / "run"
    code = cli.main(["simulate", "--config", str(path), "--alpha", "0.6", "--k", "3", "--gain", "2",
                     "--record-every", "10", "--out", str(out), *SHORT])
    assert code == 0
    used = load_scenario(out / "config.json")
    assert used.alpha.alpha == 0.6 and used.params.k == 3.0 and used.params.gains == 2.0
    assert used.record_every == 10


def test_validation_exit(tmp_path, capsys):
    doc = json.loads(json.dumps(cli.config_to_dict(preset_karate(0))))
    doc["edges"] = [e for e in doc["edges"] if e[0] not in (6, 7)] + [[6, 7], [7, 6]]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert cli.main(["simulate", "--config", str(path), "--out", str(tmp_path / "r")]) == cli.EXIT_VALIDATION
    assert "not reachable" in capsys.readouterr().err


def test_step_size_exit(tmp_path, capsys):
    out = tmp_path / "r"
    assert cli.main(["simulate", "--preset", "karate", "--alpha", "1", "--step", "5", "--out", str(out)]) == cli.EXIT_STEP_SIZE
    assert json.loads((out / "manifest.json").read_text())["status"] == "step_size"
    assert "convex-combination" in capsys.readouterr().err


def test_breach_exit_keeps_partial_files(tmp_path):
    out = tmp_path / "r"
    code = cli.main(["simulate", "--alpha", "0.5", "--step", "0.15", "--horizon", "30", "--out", str(out)])
    assert code == cli.EXIT_BREACH
    report = json.loads((out / "report.json").read_text())
    assert report["complete"] is False and report["failure"]["kind"] == "barrier_breach"


def test_divergence_exit(tmp_path, monkeypatch):
    def boom(config):
        raise DivergenceError("non-finite follower state at step 3", step=3)

    monkeypatch.setattr(cli, "run_fractional", boom)
    assert cli.main(["simulate", "--out", str(tmp_path / "r"), *SHORT]) == cli.EXIT_DIVERGENCE


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["simulate", "--alpha"])
    assert info.value.code == cli.EXIT_USAGE
    assert cli.main(["simulate", "--preset", "karate", "--config", "x.json", "--out", str(tmp_path)]) == cli.EXIT_USAGE
    assert cli.main(["sweep", "--seed", "4:4", "--out", str(tmp_path / "s")]) == cli.EXIT_USAGE


def test_sweep_table_and_determinism(tmp_path):
    args = ["sweep", "--alpha", "0.5", "0.8", "1.0", "--seed", "0:2", *SHORT]
    assert cli.main([*args, "--out", str(tmp_path / "a")]) == 0
    assert cli.main([*args, "--jobs", "2", "--out", str(tmp_path / "b")]) == 0
    table_a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert table_a == (tmp_path / "b" / "sweep.csv").read_bytes()
    rows = list(csv.DictReader(table_a.decode().splitlines()))
    assert len(rows) == 6
    assert all(r["connectivity_preserved"] == "True" and r["status"] == "ok" for r in rows)
    run = tmp_path / "a" / "runs" / rows[0]["run_id"]
    assert (run / "report.json").exists() and not (run / "trajectory.csv").exists()


def test_sweep_reports_failures(tmp_path):
    code = cli.main(["sweep", "--alpha", "0.5", "--seed", "0", "--step", "0.15", "--horizon", "30",
                     "--out", str(tmp_path / "s")])
    assert code == cli.EXIT_FAILED_RUNS
    rows = list(csv.DictReader((tmp_path / "s" / "sweep.csv").read_text().splitlines()))
    assert rows[0]["status"] == "barrier_breach"


def test_preset_command(tmp_path):
    path = tmp_path / "k.json"
    assert cli.main(["preset", "--seed", "5", "--alpha", "0.5", "--out", str(path)]) == 0
    cfg = load_scenario(path)
    assert cfg.alpha.alpha == 0.5 and config_hash(cfg) == config_hash(preset_karate(5, alpha=0.5))


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "fraccontain", "simulate", "--alpha", "1", "--step", "5", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == cli.EXIT_STEP_SIZE
