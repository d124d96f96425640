import csv
import json
import shutil
import subprocess
import sys
import textwrap

import pytest

from bosekin import cli
from bosekin.grid import moments, read_state

BASE = """
[kernel]
family = "hard_sphere"

[grid]
L = 4.5
N = 8

[initial]
kind = "gaussian"
mass = {mass}
covariance = [1.0, 0.8, 0.6]
{initial_extra}

[solver]
scheme = "DuhamelIntermediate"
dt_output = 0.1
t_end = {t_end}
{solver_extra}

[output]
directory = "out"
formats = {formats}
"""


def write_config(tmp_path, mass=0.5, t_end=0.2, initial_extra="", solver_extra="", formats='["csv", "json"]',
                 name="run.toml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(BASE.format(mass=mass, t_end=t_end, initial_extra=initial_extra,
                                                solver_extra=solver_extra, formats=formats)))
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_run_minimal_config(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert cli.main(["run", "--config", str(cfg)]) == 0
    rows = read_csv(tmp_path / "out" / "trajectory.csv")
    assert rows[0][:11] == ["t", "M0", "M1x", "M1y", "M1z", "M2", "L13", "Linf", "drift_mass", "drift_momentum",
                            "drift_energy"]
    assert rows[0][11:] == ["margin_l13_uniform", "margin_moment_envelope"]
    assert [float(r[0]) for r in rows[1:]] == pytest.approx([0.0, 0.1, 0.2])
    report = json.loads((tmp_path / "out" / "theorem_report.json").read_text())
    assert report["schema"] == 1 and "condition_holds" in report["report"]
    summary = json.loads((tmp_path / "out" / "run_summary.json").read_text())
    assert summary["records"] == 3 and summary["failed_monitors"] == [] and summary["clamped_mass"] == 0.0


def test_run_t_end_zero_single_record(tmp_path):
    cfg = write_config(tmp_path, t_end=0.0)
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "trajectory.csv")
    assert len(rows) == 2 and float(rows[1][0]) == 0.0


def test_run_snapshots(tmp_path):
    cfg = write_config(tmp_path, t_end=0.1, formats='["csv", "snapshots"]')
    assert cli.main(["run", "--config", str(cfg)]) == 0
    snaps = sorted((tmp_path / "out").glob("state_*.bin"))
    assert [p.name for p in snaps] == ["state_00000.bin", "state_00001.bin"]
    rows = read_csv(tmp_path / "out" / "trajectory.csv")
    assert moments(read_state(snaps[1])).m0 == float(rows[2][1])
    assert not (tmp_path / "out" / "theorem_report.json").exists()


def test_run_rejects_zero_mass(tmp_path, capsys):
    cfg = write_config(tmp_path, mass=0.0)
    assert cli.main(["run", "--config", str(cfg)]) == 2
    assert "M2 > 0" in capsys.readouterr().err


@pytest.mark.parametrize("mutation", [
    lambda s: s.replace('family = "hard_sphere"', 'family = "coulomb"'),
    lambda s: s.replace("N = 8", "N = 8.5"),
    lambda s: s.replace("[output]", "[bogus]\nx = 1\n[output]"),
    lambda s: s.replace('kind = "gaussian"', 'kind = "file"\npath = "missing.bin"'),
    lambda s: s.replace("t_end = 0.2", "t_end = -1.0"),
    lambda s: s + "\n[checks]\nmonitors = [\"nope\"]\n",
    lambda s: s.replace("[kernel]", "[kernel]\npsi_table_path = \"absent.csv\""),
    lambda s: s.replace("[kernel", "kernel"),
])
def test_config_errors_exit_2(tmp_path, mutation):
    cfg = write_config(tmp_path)
    cfg.write_text(mutation(cfg.read_text()))
    assert cli.main(["run", "--config", str(cfg)]) == 2


def test_missing_config_exits_2(tmp_path):
    assert cli.main(["run"]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "none.toml")]) == 2
    assert cli.main(["frobnicate"]) == 2


def test_runtime_error_exits_3_with_diagnostics(tmp_path):
    cfg = write_config(tmp_path, solver_extra="n = 1.0\npicard_max_iter = 1")
    cfg.write_text(cfg.read_text().replace('scheme = "DuhamelIntermediate"', 'scheme = "PicardCutoff"'))
    assert cli.main(["run", "--config", str(cfg)]) == 3
    diag = json.loads((tmp_path / "out" / "diagnostics.json").read_text())
    assert diag["error"] == "NonConvergenceError" and diag["residual"] > 0
    assert read_state(tmp_path / "out" / "diagnostic_state.bin").grid.points_per_axis == 8


def test_monitor_failure_exits_1(tmp_path):
    cfg = write_config(tmp_path, mass=4.0, t_end=0.1)
    cfg.write_text(cfg.read_text() + '\n[checks]\nmonitors = ["linf_ceiling"]\n')
    assert cli.main(["run", "--config", str(cfg)]) == 1
    summary = json.loads((tmp_path / "out" / "run_summary.json").read_text())
    assert summary["failed_monitors"] == ["linf_ceiling"]


def test_check_theorem_tiny_scale_holds(tmp_path, capsys):
    cfg = write_config(tmp_path, initial_extra="scale = 1e-45")
    assert cli.main(["check-theorem", "--config", str(cfg)]) == 0
    report = json.loads(capsys.readouterr().out)["report"]
    assert report["condition_holds"] and report["condition_lhs"] <= report["condition_rhs"]


def test_check_theorem_scale_to_condition(tmp_path, capsys):
    cfg = write_config(tmp_path, initial_extra="scale_to_condition = 0.5")
    assert cli.main(["check-theorem", "--config", str(cfg)]) == 0
    report = json.loads(capsys.readouterr().out)["report"]
    assert report["condition_lhs"] == pytest.approx(0.5 * report["condition_rhs"], rel=1e-9)


def test_check_theorem_dense_datum_fails(tmp_path, capsys):
    cfg = write_config(tmp_path, mass=1.0)
    assert cli.main(["check-theorem", "--config", str(cfg), "--out", str(tmp_path / "rep")]) == 1
    report = json.loads(capsys.readouterr().out)["report"]
    assert not report["condition_holds"] and report["K"] == pytest.approx(1 / 14)
    assert (tmp_path / "rep" / "theorem_report.json").exists()


def test_check_theorem_k_override(tmp_path, capsys):
    cfg = write_config(tmp_path)
    cli.main(["check-theorem", "--config", str(cfg), "--K", "0.25"])
    report = json.loads(capsys.readouterr().out)["report"]
    assert report["K"] == 0.25 and report["K_star"] == pytest.approx(1 / 14)


def test_verify_povzner(capsys):
    assert cli.main(["verify", "--suite", "povzner", "--trials", "10000", "--seed", "7"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["suites"][0]["status"] == "pass" and doc["suites"][0]["seed"] == 7


def test_verify_unknown_suite_exits_2():
    assert cli.main(["verify", "--suite", "nope"]) == 2


def test_verify_zero_trials(capsys):
    with pytest.warns(UserWarning):
        assert cli.main(["verify", "--suite", "povzner,radial_power_mean", "--trials", "0"]) == 0


def test_verify_fixed_seed_is_bit_identical(capsys):
    cli.main(["verify", "--suite", "lemma_minmax,exchange_prime", "--trials", "5000", "--seed", "3"])
    first = capsys.readouterr().out
    cli.main(["verify", "--suite", "lemma_minmax,exchange_prime", "--trials", "5000", "--seed", "3"])
    assert capsys.readouterr().out == first


def test_rerun_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path, t_end=0.1)
    names = ("trajectory.csv", "theorem_report.json", "run_summary.json")
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--threads", "1"]) == 0
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_float_format_round_trips():
    for x in (0.1, 1 / 3, 1e-300, 123456789.123456789):
        assert float(cli.fmt(x)) == x
    assert cli.fmt(float("inf")) == "inf" and cli.fmt(float("nan")) == "nan"


def test_bench_reports_throughput(capsys):
    assert cli.main(["bench", "--N", "6"]) == 0
    bench = json.loads(capsys.readouterr().out)["bench"]
    assert bench["seconds"] > 0 and bench["N"] == 6 and bench["angles"] == 32


@pytest.mark.skipif(shutil.which("bosekin") is None, reason="console script not installed")
def test_console_script_entry_point(tmp_path):
    proc = subprocess.run(["bosekin", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "0.1.0"
    proc = subprocess.run([sys.executable, "-m", "bosekin.cli", "verify", "--suite", "nope"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
