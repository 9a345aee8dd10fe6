import json
import subprocess
import sys

import numpy as np
import pytest

from rswshock import io as rio
from rswshock.cli import main

SMALL_GRID = {"n1": 512, "n2": 8}


def _cfg(tmp_path, doc, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def _gen(tmp_path, doc):
    out = tmp_path / "gen"
    assert main(["gen-data", "--config", _cfg(tmp_path, doc), "--out", str(out)]) == 0
    return json.loads((out / "generation.json").read_text())["report"]


def test_gen_data_zero_profiles(tmp_path):
    rep = _gen(tmp_path, {"pulse": {"preset": "zero"}, "grid": SMALL_GRID})
    assert rep["shock_expected"] is False
    s = rio.load_snapshot(tmp_path / "gen" / "initial.rsw")
    assert np.all(s.h == 1.0) and np.all(s.v1 == 0.0) and np.all(s.v2 == 0.0)


def test_gen_data_normalised_pulse(tmp_path):
    rep = _gen(tmp_path, {"pulse": {}, "grid": SMALL_GRID})
    assert rep["T_pred"] == pytest.approx(2 / 3, rel=1e-12)
    assert rep["shock_expected"] is True


def test_gen_data_selfsimilar(tmp_path):
    rep = _gen(tmp_path, {"selfsimilar": {"n": 1}, "grid": {"n1": 1024, "n2": 8}})
    assert rep["min_d1_rho"] == pytest.approx(-1.0, abs=0.02)


@pytest.fixture(scope="module")
def trivial_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("trivial")
    cfg = _cfg(d, {"pulse": {"preset": "zero"}, "grid": SMALL_GRID, "solver": {"t_end": 0.05}})
    code = main(["run", "--config", cfg, "--out-dir", str(d / "run")])
    return code, d / "run"


def test_run_trivial_completes(trivial_run):
    code, run = trivial_run
    assert code == 0
    man = json.loads((run / "manifest.json").read_text())
    assert man["status"] == "Completed"
    S = rio.read_series(run / "series.csv")
    assert S["t"][-1] == pytest.approx(0.05) and np.all(S["max_grad_v1"] == 0.0)
    for f in ("series.csv", "extra.csv", "rays.csv", "particles.csv", "plot_mu.gp"):
        assert (run / f).exists()


def test_analyze_trivial_reports_no_fit(trivial_run, capsys):
    _, run = trivial_run
    assert main(["analyze", "--run", str(run)]) == 0
    rep = json.loads((run / "report.json").read_text())
    assert rep["fit"] is None and "fit_error" in rep


def test_run_from_gen_data_directory(tmp_path):
    cfg = _cfg(tmp_path, {"pulse": {"preset": "zero"}, "grid": SMALL_GRID, "solver": {"t_end": 0.01}})
    assert main(["gen-data", "--config", cfg, "--out", str(tmp_path / "g")]) == 0
    assert main(["run", "--config", cfg, "--data", str(tmp_path / "g"), "--out-dir", str(tmp_path / "r")]) == 0
    assert main(["run", "--config", cfg, "--data", str(tmp_path / "nope"), "--out-dir", str(tmp_path / "r2")]) == 2


def test_analyze_missing_series_exits_2(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["analyze", "--run", str(tmp_path / "empty")]) == 2
    assert "series.csv" in capsys.readouterr().err


@pytest.mark.parametrize("doc", [{"pulse": {"delta": -1.0}}, {"pulse": {}, "typo": 1}, {"grid": {}}])
def test_bad_config_exits_2(tmp_path, doc):
    assert main(["gen-data", "--config", _cfg(tmp_path, doc), "--out", str(tmp_path / "o")]) == 2
    assert main(["run", "--config", _cfg(tmp_path, doc), "--out-dir", str(tmp_path / "o")]) == 2


def test_unparseable_config_exits_2(tmp_path):
    p = tmp_path / "b.json"
    p.write_text("{")
    assert main(["gen-data", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_burgers_tables(tmp_path):
    assert main(["burgers", "--n", "1", "3", "--points", "101", "--out", str(tmp_path)]) == 0
    S = rio.read_series(tmp_path / "burgers_n3.csv")
    assert S["y"].size == 101 and np.max(np.abs(S["residual"])) < 1e-12
    assert not (tmp_path / "burgers_n2.csv").exists()


def test_oracle_command(tmp_path):
    assert main(["oracle", "--n", "1", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "oracle.json").read_text())
    assert summary["rel_error_T"] <= 0.01
    assert -1.1 <= summary["exponent"] <= -0.9


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "rswshock.cli", "burgers", "--n", "2", "--points", "11",
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0 and "n=2" in r.stdout
    r = subprocess.run([sys.executable, "-m", "rswshock.cli", "frobnicate"], capture_output=True, text=True)
    assert r.returncode == 2


# --------------------------------------------------------------- pulse run

REPORT_KEYS = {"run", "status", "kind", "delta", "fit", "T_pred", "rates", "checks", "holder",
               "max_grad_growth", "multi_run_checks"}
CHECK_KEYS = {"shock_time", "mu_prediction", "blowup_rate", "pv_drift", "pv_band", "good_direction",
              "mass"}


@pytest.fixture(scope="module")
def pulse_cli_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("pulse")
    cfg = _cfg(d, {"pulse": {}, "grid": SMALL_GRID, "solver": {"snapshot_every": 2000}})
    assert main(["run", "--config", cfg, "--out-dir", str(d / "run")]) == 0
    assert main(["analyze", "--run", str(d / "run")]) == 0
    return cfg, d / "run"


def test_pulse_run_detects_blowup(pulse_cli_run):
    _, run = pulse_cli_run
    man = json.loads((run / "manifest.json").read_text())
    assert man["status"] == "BlowupDetected"
    rep = json.loads((run / "report.json").read_text())
    assert 0.60 <= rep["fit"]["T_grad"] <= 0.75


def test_report_schema(pulse_cli_run):
    _, run = pulse_cli_run
    rep = json.loads((run / "report.json").read_text())
    assert REPORT_KEYS <= set(rep)
    assert CHECK_KEYS <= set(rep["checks"])
    for c in rep["checks"].values():
        assert set(c) == {"value", "threshold", "pass"} and isinstance(c["pass"], bool)
    assert set(rep["fit"]) >= {"T_grad", "T_mu", "resid_grad", "resid_mu"}
    assert set(rep["rates"]) == {"max_grad_v1", "max_grad_h", "max_grad_zeta"}
    # comoving runs skip the dichotomy and say why
    assert "lipschitz_dichotomy" not in rep["checks"] and "note" in rep["holder"]


def test_analyze_is_idempotent(pulse_cli_run):
    _, run = pulse_cli_run
    first = (run / "report.json").read_bytes()
    plots = (run / "plot_mu.gp").read_bytes()
    assert main(["analyze", "--run", str(run)]) == 0
    assert (run / "report.json").read_bytes() == first
    assert (run / "plot_mu.gp").read_bytes() == plots


def test_trace_command(pulse_cli_run):
    _, run = pulse_cli_run
    assert main(["trace", "--run", str(run)]) == 0
    S = rio.read_series(run / "rays_trace.csv")
    assert S["mu"].size > 0 and np.nanmin(S["mu"]) < 1.0


def test_trace_needs_snapshots(tmp_path):
    assert main(["trace", "--run", str(tmp_path)]) == 2


def test_rerun_is_byte_identical(pulse_cli_run, tmp_path):
    cfg, run = pulse_cli_run
    assert main(["run", "--config", cfg, "--out-dir", str(tmp_path / "again"), "--threads", "2"]) == 0
    assert (tmp_path / "again" / "series.csv").read_bytes() == (run / "series.csv").read_bytes()
