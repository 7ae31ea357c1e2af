import json
import math
import os

import numpy as np
import pytest

from spfl.cli import main
from spfl.config import SCHEMA, RunConfig, setup_config_text
from spfl.errors import InvalidConfiguration
from spfl.spectral import SweepCurve, analytic_sweep, fringe_model

from conftest import setup_spectral

FAST = ["--n-gates", "200000"]


# -- config -------------------------------------------------------------------

def test_setup_config_round_trip(tmp_path):
    cfg = RunConfig.load("setup")
    p = tmp_path / "x.config"
    cfg.save(p)
    again = RunConfig.load(p)
    assert again == cfg
    assert RunConfig.from_text(again.to_text()) == cfg


def test_setup_config_values():
    cfg = RunConfig.load("setup")
    assert cfg["loop.nlf_length_m"] == 300.0
    assert cfg["loop.nlf_zdw_nm"] == 1547.0
    assert (cfg["loop.smf1_length_m"], cfg["loop.smf2_length_m"]) == (3.0, 1.0)
    assert cfg["spectral.lambda_p0_nm"] == 1547.5
    assert cfg["spectral.pump_pulse_ps"] == 4.0
    assert (cfg["spectral.pump_fwhm_nm"], cfg["spectral.f2_fwhm_nm"],
            cfg["spectral.f3_fwhm_nm"]) == (0.9, 0.7, 1.3)
    assert cfg["spectral.alpha_ps2"] == 0.0435
    assert (cfg["spectral.xi_same_cps"], cfg["spectral.xi_diff_cps"]) == (29.5, 32.3)
    assert cfg["source.gate_rate_hz"] == 3.1e6 and cfg["source.rep_divisor"] == 8
    assert cfg["source.pump_power_mw"] == 0.23
    assert cfg["detectors.gate_width_ns"] == 2.5 and cfg["detectors.dead_time_us"] == 10.0
    assert cfg.loop().alpha == pytest.approx(cfg["spectral.alpha_ps2"], rel=1e-12)
    # every schema key is present in the bundled file
    text = setup_config_text()
    for keys in SCHEMA.values():
        for k in keys:
            assert f"\n{k} " in text


def test_unknown_key_rejected():
    with pytest.raises(InvalidConfiguration, match="loop.smf3_length_m"):
        RunConfig.from_text("[loop]\nsmf3_length_m = 2\n")
    with pytest.raises(InvalidConfiguration, match="optics"):
        RunConfig.from_text("[optics]\nx = 1\n")


def test_invalid_values_named():
    with pytest.raises(InvalidConfiguration, match="spectral.quad_order"):
        RunConfig.from_text("[spectral]\nquad_order = sixteen\n")
    with pytest.raises(InvalidConfiguration, match=r"\[detectors\]"):
        RunConfig.from_text("[detectors]\nspd1_efficiency = 1.5\n")
    with pytest.raises(InvalidConfiguration, match="run.n_gates"):
        RunConfig.from_text("[run]\nn_gates = 0\n")


# -- sweep --------------------------------------------------------------------

def test_cmd_sweep_analytic(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--analytic", "--grid", "4:20:0.2", "--out", str(out)]) == 0
    curve = SweepCurve.from_csv(out)
    assert len(curve) == 81
    peak = curve.delta_lambda[np.argmax(curve.c_t_diff[:40])]
    assert abs(peak - 10.73) <= 0.2


def test_cmd_sweep_empty_grid(tmp_path):
    assert main(["sweep", "--grid", "10:4:0.2", "--out", str(tmp_path / "x")]) == 1
    assert main(["sweep", "--grid", "nonsense"]) == 1


def test_cmd_sweep_montecarlo_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", "--montecarlo", "--grid", "8:16:2", "--seed", "3"] + FAST
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    curve = SweepCurve.from_csv(a)
    assert curve.singles is not None


def test_cmd_sweep_unwritable(tmp_path):
    assert main(["sweep", "--grid", "4:5:1", "--out", str(tmp_path / "no" / "dir" / "x.csv")]) == 2


def test_cmd_sweep_bad_config(tmp_path):
    bad = tmp_path / "bad.config"
    bad.write_text("[loop]\nwhat = 1\n")
    assert main(["sweep", "--config", str(bad), "--grid", "4:5:1"]) == 1
    assert main(["sweep", "--config", str(tmp_path / "missing.config")]) == 2


# -- fit ----------------------------------------------------------------------

def test_cmd_fit_round_trip(tmp_path, capsys):
    data = tmp_path / "d.csv"
    analytic_sweep(setup_spectral(), np.arange(4.0, 20.01, 0.5), averaged=False).to_csv(data)
    report = tmp_path / "r.json"
    assert main(["fit", "--data", str(data), "--init", "25,36,0.05", "--report", str(report)]) == 0
    got = json.loads(report.read_text())
    assert got["xi_same_cps"] == pytest.approx(29.5, rel=1e-6)
    assert got["xi_diff_cps"] == pytest.approx(32.3, rel=1e-6)
    assert got["alpha_ps2"] == pytest.approx(0.0435, rel=1e-6)
    assert "alpha=" in capsys.readouterr().out


def test_cmd_fit_malformed(tmp_path, capsys):
    data = tmp_path / "d.csv"
    data.write_text("delta_lambda_nm,ct_same,ct_diff,err_same,err_diff\n"
                    "4.0,1,2,0,0\n5.0,1,oops,0,0\n")
    assert main(["fit", "--data", str(data), "--init", "30,30,0.04"]) == 1
    assert "line 3" in capsys.readouterr().err


def test_cmd_fit_missing_file(tmp_path):
    assert main(["fit", "--data", str(tmp_path / "nope.csv"), "--init", "30,30,0.04"]) == 2


def test_cmd_fit_degenerate(tmp_path):
    data = tmp_path / "d.csv"
    data.write_text("delta_lambda_nm,ct_same,ct_diff,err_same,err_diff\n"
                    "10.0,1,2,0,0\n10.01,1,2,0,0\n10.02,1,2,0,0\n10.03,1,2,0,0\n")
    assert main(["fit", "--data", str(data), "--init", "30,30,0.04"]) == 3


# -- design / power -----------------------------------------------------------

def test_cmd_design(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["design", "--n-max", "2", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n,delta_lambda_diff_nm,delta_lambda_same_nm"
    assert len(lines) == 4
    n, d, s = lines[1].split(",")
    assert n == "0" and float(d) == pytest.approx(10.73, abs=0.005)
    assert float(s) == pytest.approx(15.13, abs=0.005)
    assert main(["design", "--n-max", "-1"]) == 1


def test_cmd_power_slope(tmp_path):
    cfg = RunConfig.load("setup").replace(detectors__dead_time_us=0.0,
                                          detectors__spd2_efficiency=0.5,
                                          detectors__spd3_efficiency=0.5)
    cpath = tmp_path / "c.config"
    cfg.save(cpath)
    out = tmp_path / "p.csv"
    assert main(["power", "--config", str(cpath), "--powers", "0.1,0.2,0.3,0.4",
                 "--n-gates", "4000000", "--out", str(out)]) == 0
    rows = np.loadtxt(out, delimiter=",", skiprows=1)
    slope = np.polyfit(np.log(rows[:, 0]), np.log(rows[:, 2]), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)


def test_cmd_config_dump(capsys):
    assert main(["config"]) == 0
    assert RunConfig.from_text(capsys.readouterr().out) == RunConfig.load("setup")


def test_exit_codes_disjoint():
    from spfl import cli
    codes = {cli.EXIT_OK, cli.EXIT_INPUT, cli.EXIT_IO, cli.EXIT_NUMERIC}
    assert codes == {0, 1, 2, 3}
    assert main(["bogus"]) == 1
