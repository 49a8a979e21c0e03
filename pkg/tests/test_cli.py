"""End-to-end command-line checks via subprocess."""

import os
import subprocess
import sys

import pytest

from qifsim.scenario import load_reference_scenario, serialize_scenario

DIGEST = "eb1952feeb4f"


def run_cli(*args, cwd, env_extra=None):
    env = dict(os.environ)
    env.pop("QIFSIM_OUT", None)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "qifsim.cli", *args],
        capture_output=True,
        text=True,
        cwd=cwd,
        env=env,
    )


def data_rows(path):
    lines = [
        line
        for line in path.read_text().splitlines()
        if line and not line.startswith("#")
    ]
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


def test_budget_prints_table_and_logs(tmp_path):
    proc = run_cli("budget", cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert "eta_QI" in proc.stdout
    assert "0.133 %" in proc.stdout
    csv_path = tmp_path / f"{DIGEST}-budget.csv"
    assert csv_path.exists()
    header, rows = data_rows(csv_path)
    assert header == ["stage", "transmission", "cumulative"]
    assert rows[0][0] == "pre/in_coupling"
    assert rows[-1][0] == "eta_QI"
    assert float(rows[-1][2]) == pytest.approx(0.0013291635371188786, rel=1e-12)
    log = (tmp_path / "run.log").read_text().splitlines()
    assert len(log) == 1
    assert "command=budget" in log[0]
    assert f"digest={DIGEST}" in log[0]
    assert "seed=20260816" in log[0]
    assert log[0].endswith("status=ok")


def test_qpm_solve_reports_bulk_period(tmp_path):
    proc = run_cli("qpm-solve", cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert "15.3237 um" in proc.stdout
    header, rows = data_rows(tmp_path / f"{DIGEST}-qpm.csv")
    assert header == ["quantity", "value", "unit"]
    table = {name: value for name, value, _ in rows}
    assert float(table["output_wavelength"]) == pytest.approx(1.308693586698337)
    assert float(table["poling_period_bulk_matched"]) == pytest.approx(
        15.323661866883143
    )


def test_fringe_scan_reruns_are_byte_identical(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        proc = run_cli("fringe-scan", "--pulses", "20000", "--out", str(out), cwd=tmp_path)
        assert proc.returncode == 0, proc.stderr
        assert "V_raw = " in proc.stdout
    name = f"{DIGEST}-fringe.csv"
    assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_seed_override_changes_output_name(tmp_path):
    proc = run_cli("fringe-scan", "--pulses", "20000", "--seed", "1", cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    produced = list(tmp_path.glob("*-fringe.csv"))
    assert len(produced) == 1
    assert produced[0].name != f"{DIGEST}-fringe.csv"
    assert "seed=1" in (tmp_path / "run.log").read_text()


def test_histogram_covers_full_sync_period(tmp_path):
    proc = run_cli("histogram", "--pulses", "5000", cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert "sync pulses" in proc.stdout
    header, rows = data_rows(tmp_path / f"{DIGEST}-histogram.csv")
    assert header == ["bin_start_ns", "bin_end_ns", "counts"]
    assert len(rows) == 334  # 16.667 ns sync period over 50 ps bins
    assert float(rows[0][0]) == 0.0


def test_efficiency_curve_grid_flag(tmp_path):
    proc = run_cli("efficiency-curve", "--powers", "0:0.65:5", cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert "eta_QI at 0.650 W" in proc.stdout
    assert "0.1329 %" in proc.stdout
    header, rows = data_rows(tmp_path / f"{DIGEST}-efficiency.csv")
    assert header == ["power_w", "eta_qi_analytic", "eta_qi_mc", "stat_error"]
    assert len(rows) == 5
    assert float(rows[0][1]) == 0.0
    assert float(rows[-1][1]) == pytest.approx(0.0013291635371188786, rel=1e-12)


def test_repeater_rates_sweep(tmp_path):
    proc = run_cli("repeater-rates", cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert "illustrative" in proc.stdout
    assert "break-even length: 15.14 km" in proc.stdout
    header, rows = data_rows(tmp_path / f"{DIGEST}-repeater.csv")
    assert len(rows) == 50
    assert float(rows[0][0]) == 2.0
    assert float(rows[-1][0]) == 100.0
    ratios = [float(r[5]) for r in rows]
    assert ratios[0] < 1.0 < ratios[-1]  # break-even sits inside the grid
    assert all(a < b for a, b in zip(ratios, ratios[1:]))


def test_validate_command(tmp_path):
    proc = run_cli("validate", "--pulses", "20000", cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert "chi2/dof = " in proc.stdout
    header, rows = data_rows(tmp_path / f"{DIGEST}-validate.csv")
    assert header == ["phase_rad", "observed", "expected", "z_score"]
    assert len(rows) == 12


def test_missing_scenario_exits_2_without_outputs(tmp_path):
    proc = run_cli("budget", "--scenario", "nope.scenario", cwd=tmp_path)
    assert proc.returncode == 2
    assert "config error" in proc.stderr
    assert "not found" in proc.stderr
    assert list(tmp_path.glob("*.csv")) == []
    log = (tmp_path / "run.log").read_text()
    assert "status=error:ConfigError" in log
    assert "digest=-" in log


def test_bad_phase_grid_exits_2(tmp_path):
    proc = run_cli("fringe-scan", "--phases", "0:6.28", cwd=tmp_path)
    assert proc.returncode == 2
    assert "start:stop:n" in proc.stderr


def test_unknown_command_rejected(tmp_path):
    proc = run_cli("melt-crystal", cwd=tmp_path)
    assert proc.returncode == 2
    assert "invalid choice" in proc.stderr


def test_out_dir_env_variable(tmp_path):
    target = tmp_path / "results"
    proc = run_cli("budget", cwd=tmp_path, env_extra={"QIFSIM_OUT": str(target)})
    assert proc.returncode == 0, proc.stderr
    assert (target / f"{DIGEST}-budget.csv").exists()
    assert not (tmp_path / f"{DIGEST}-budget.csv").exists()


def test_explicit_scenario_path(tmp_path):
    copy = tmp_path / "local.scenario"
    copy.write_text(serialize_scenario(load_reference_scenario()))
    proc = run_cli("budget", "--scenario", str(copy), cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / f"{DIGEST}-budget.csv").exists()
