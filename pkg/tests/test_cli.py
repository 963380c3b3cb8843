import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from geoqsl import cli, experiments
from geoqsl.cli import RunConfig, UsageError


def run(tmp_path, *args):
    return cli.main(["--out", str(tmp_path), *args])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestScenario:
    def test_ho_linear(self, tmp_path, capsys):
        assert run(tmp_path, "scenario", "ho-linear", "--omega", "1") == 0
        rep = json.loads((tmp_path / "ho-linear.json").read_text())
        assert rep["l_E"] / rep["l_g_control"] == pytest.approx(2 / np.pi, abs=1e-8)
        assert rep["saturated"]
        assert "ho-linear: l_E=" in capsys.readouterr().out

    def test_trajectory_csv(self, tmp_path):
        assert run(tmp_path, "scenario", "ho-linear") == 0
        rows = read_csv(tmp_path / "ho-linear_trajectory.csv")
        assert {"t", "deltaE", "cumulative_length"} <= set(rows[0])
        assert float(rows[-1]["cumulative_length"]) == pytest.approx(np.sqrt(2), abs=1e-6)
        # 17 significant digits round-trip exactly
        assert float(rows[1]["t"]) == float(repr(float(rows[1]["t"])))

    def test_qubit_reference(self, tmp_path):
        args = ["scenario", "qubit-circle", "--theta", "0.7853981634", "--omega", "-0.5", "--s", "0.4", "--T", "1.4778"]
        assert run(tmp_path, *args) == 0
        rep = json.loads((tmp_path / "qubit-circle.json").read_text())
        assert rep["l_E"] == pytest.approx(0.81, abs=0.02)
        assert rep["original_conjecture_violated"]

    def test_great_circle(self, tmp_path):
        assert run(tmp_path, "scenario", "qubit-circle", "--theta", "1.5707963268", "--s", "0.4") == 0
        rep = json.loads((tmp_path / "qubit-circle.json").read_text())
        assert not rep["original_conjecture_violated"]

    def test_lambda_plane_convention(self, tmp_path):
        assert run(tmp_path, "scenario", "ho-linear", "--convention", "lambda-plane") == 0
        rep = json.loads((tmp_path / "ho-linear.json").read_text())
        assert rep["l_E"] == pytest.approx(2.0, abs=1e-6)
        assert rep["l_g_control"] == pytest.approx(np.pi, abs=1e-6)

    def test_csv_report(self, tmp_path):
        assert run(tmp_path, "--format", "csv", "scenario", "qutrit-linear", "--lambda-star", "2") == 0
        (row,) = read_csv(tmp_path / "qutrit-linear.csv")
        forms = experiments.qutrit_closed_forms(2.0, 2.0)
        assert float(row["l_g_control"]) == pytest.approx(forms["l_g"], abs=1e-6)
        assert row["modified_inequality_holds"] == "true"


class TestConfig:
    def test_round_trip(self, tmp_path):
        first = tmp_path / "a"
        second = tmp_path / "b"
        assert cli.main(["--out", str(first), "scenario", "qutrit-linear", "--a", "1.5", "--lambda-star", "3"]) == 0
        echoed = json.loads((first / "qutrit-linear.json").read_text())["config"]
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps(echoed))
        assert cli.main(["--out", str(second), "--config", str(cfg_file), "scenario"]) == 0
        assert (first / "qutrit-linear.json").read_bytes() == (second / "qutrit-linear.json").read_bytes()

    def test_flags_override_file(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"scenario": "qutrit-linear", "lambda_star": 1.0}))
        assert run(tmp_path, "--config", str(cfg_file), "scenario", "--lambda-star", "2") == 0
        rep = json.loads((tmp_path / "qutrit-linear.json").read_text())
        assert rep["config"]["lambda_star"] == 2.0

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(UsageError):
            RunConfig.from_dict({"scenario": "ho-linear", "colour": 3})
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"scenario": "ho-linear", "colour": 3}))
        assert run(tmp_path, "--config", str(cfg_file), "scenario") == 1

    def test_echo_drops_output_keys(self):
        cfg = RunConfig(scenario="ho-linear", omega=2.0, out="/tmp", jobs=4)
        echo = cfg.echo()
        assert not set(cli.OUTPUT_KEYS) & set(echo)
        assert echo["scenario"] == "ho-linear" and echo["omega"] == 2.0
        assert RunConfig.from_dict(echo).echo() == echo


class TestExitCodes:
    def test_usage_errors(self, tmp_path):
        assert run(tmp_path, "scenario", "ho-linear", "--omega", "-1") == 1
        assert run(tmp_path, "scenario", "qubit-circle", "--theta", "4") == 1
        assert run(tmp_path, "scenario") == 1
        assert run(tmp_path, "scenario", "ho-linear", "--r", "1.0") == 1

    def test_parser_errors_exit_one(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run(tmp_path, "scenario", "no-such-scenario")
        assert exc.value.code == 1
        with pytest.raises(SystemExit) as exc:
            run(tmp_path, "frobnicate")
        assert exc.value.code == 1

    def test_physics_violation_exits_two(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr(
            experiments, "check_inequalities", lambda rep: experiments.Verdicts(False, False, False)
        )
        assert run(tmp_path, "scenario", "qutrit-linear") == 2
        assert "physics check failed" in capsys.readouterr().err

    def test_failed_metric_check_exits_two(self, tmp_path, monkeypatch):
        monkeypatch.setattr(cli, "QGT_TOL", 0.0)
        assert run(tmp_path, "qgt-check", "coherent", "--grid", "2") == 2

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "geoqsl", "--out", str(tmp_path), "scenario", "qutrit-linear"],
            capture_output=True, text=True, check=False,
        )
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "qutrit-linear.json").exists()


class TestQgtCheck:
    def test_coherent_grid(self, tmp_path):
        assert run(tmp_path, "--format", "csv", "qgt-check", "coherent", "--grid", "5") == 0
        rows = read_csv(tmp_path / "qgt_coherent.csv")
        assert len(rows) == 25
        assert max(float(r["max_deviation"]) for r in rows) < 1e-6

    def test_squeezed_grid(self, tmp_path):
        assert run(tmp_path, "qgt-check", "squeezed", "--grid", "4", "--r-max", "2") == 0
        rows = json.loads((tmp_path / "qgt_squeezed.json").read_text())
        assert all(r["status"] in ("ok", "skipped") for r in rows)

    def test_qubit_pole_skipped(self, tmp_path, capsys):
        assert run(tmp_path, "qgt-check", "qubit", "--grid", "3") == 0
        rows = json.loads((tmp_path / "qgt_qubit.json").read_text())
        skipped = [r for r in rows if r["status"] == "skipped"]
        assert skipped and all("pole" in r["note"] for r in skipped)
        assert all(float(r["point"].split()[0]) in (0.0, np.pi) for r in skipped)
        assert "skipped" in capsys.readouterr().out

    def test_bad_grid(self, tmp_path):
        assert run(tmp_path, "qgt-check", "qutrit", "--grid", "0") == 1
        assert run(tmp_path, "qgt-check", "squeezed", "--r-max", "9") == 1


class TestSweep:
    def test_qutrit_crossing(self, tmp_path):
        args = ["--format", "csv", "sweep", "qutrit-linear", "--a", "1.5", "--parameter", "lambda*",
                "--start", "1", "--stop", "15", "--steps", "8"]
        assert run(tmp_path, *args) == 0
        rows = read_csv(tmp_path / "sweep_qutrit-linear_lambda_star.csv")
        assert [float(r["value"]) for r in rows] == pytest.approx(np.linspace(1, 15, 8).tolist())
        diff = [float(r["l_g_control"]) - float(r["l_E"]) for r in rows]
        assert diff[0] < 0 < diff[-1]

    def test_qubit_s_sweep(self, tmp_path):
        args = ["sweep", "qubit-circle", "--parameter", "s", "--values", "0.1,0.05,0.025"]
        assert run(tmp_path, *args) == 0
        rows = json.loads((tmp_path / "sweep_qubit-circle_s.json").read_text())
        gaps = [abs(r["l_E"] - 0.8273) for r in rows]
        assert gaps[0] > gaps[1] > gaps[2]

    def test_parallel_matches_serial(self, tmp_path):
        base = ["sweep", "qutrit-linear", "--a", "1.5", "--parameter", "lambda_star", "--values", "0.5,1,2,4"]
        assert cli.main(["--out", str(tmp_path / "s"), *base]) == 0
        assert cli.main(["--out", str(tmp_path / "p"), "--jobs", "2", *base]) == 0
        name = "sweep_qutrit-linear_lambda_star.json"
        assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "p" / name).read_bytes()

    def test_empty_range(self, tmp_path):
        args = ["sweep", "qutrit-linear", "--parameter", "lambda_star", "--start", "2", "--stop", "1", "--steps", "3"]
        assert run(tmp_path, *args) == 1
        with pytest.raises(UsageError):
            cli.sweep_values(None, None, None, "")

    def test_unsweepable_parameter(self, tmp_path):
        assert run(tmp_path, "sweep", "qutrit-linear", "--parameter", "omega", "--values", "1,2") == 1
        assert run(tmp_path, "sweep", "ho-linear", "--parameter", "theta", "--values", "1,2") == 1
