import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from tacfit import __version__
from tacfit.cli import cli, main

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"
SCHEMAS = ROOT / "schemas"

SIM_CONFIG = """\
template_mode: single_drink
brac_subintervals: 120
q_true: [1.0, 1.0]
horizon_T: 1.0
m: 40
m_values: [20]
replicates: 2
quadrature_nodes: 2000
"""


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def sim_config(tmp_path):
    path = tmp_path / "sim.yaml"
    path.write_text(SIM_CONFIG)
    return path


def extra_config(tmp_path, text, name="extra.yaml"):
    path = tmp_path / name
    path.write_text(SIM_CONFIG + text)
    return path


def simulate(runner, config, out_dir, *extra):
    result = runner.invoke(cli, ["simulate", "-c", str(config), "-o", str(out_dir), "-q", *extra])
    assert result.exit_code == 0, result.output
    return out_dir / "tac.csv", out_dir / "brac.csv"


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_simulate_writes_session(runner, sim_config, tmp_path):
    tac, brac = simulate(runner, sim_config, tmp_path / "sim", "--sigma", "0.01", "--m", "25")
    table = pd.read_csv(tac)
    assert list(table.columns) == ["time_hours", "tac_mg_dl"]
    assert len(table) == 25
    assert len(pd.read_csv(brac)) == 121


def test_simulate_is_reproducible(runner, sim_config, tmp_path):
    first, _ = simulate(runner, sim_config, tmp_path / "a", "--sigma", "0.01", "--seed", "9")
    second, _ = simulate(runner, sim_config, tmp_path / "b", "--sigma", "0.01", "--seed", "9")
    other, _ = simulate(runner, sim_config, tmp_path / "c", "--sigma", "0.01", "--seed", "10")
    assert first.read_bytes() == second.read_bytes()
    assert first.read_bytes() != other.read_bytes()


def test_simulate_rejects_several_m(runner, sim_config, tmp_path):
    result = runner.invoke(cli, ["simulate", "-c", str(sim_config), "-o", str(tmp_path), "--m", "20,40"])
    assert result.exit_code == 1


def test_noise_free_round_trip(runner, sim_config, tmp_path):
    tac, brac = simulate(runner, sim_config, tmp_path / "sim", "--sigma", "0")
    out = tmp_path / "fit"
    result = runner.invoke(cli, [
        "estimate", "-c", str(sim_config), "--tac", str(tac), "--brac", str(brac),
        "--q0", "0.5,2", "-o", str(out),
    ])
    assert result.exit_code == 0, result.output

    report = json.loads((out / "fit_report.json").read_text())
    np.testing.assert_allclose(report["q_hat"], [1.0, 1.0], atol=1e-6)
    assert report["converged"] is True
    assert report["template"] == "single_drink"
    assert report["horizon_T"] == 1.0
    assert "Residual RMSE" in result.output
    curve = pd.read_csv(out / "fit_curve.csv")
    assert len(curve) == 40
    assert np.max(np.abs(curve["residual"])) <= 1e-7


def test_quiet_estimate_prints_one_line(runner, sim_config, tmp_path):
    tac, brac = simulate(runner, sim_config, tmp_path / "sim", "--sigma", "0.001")
    result = runner.invoke(cli, [
        "estimate", "-c", str(sim_config), "--tac", str(tac), "--brac", str(brac),
        "-o", str(tmp_path / "fit"), "-q",
    ])
    assert result.exit_code == 0, result.output
    line = [l for l in result.stdout.splitlines() if l.strip()][-1]
    q1, q2, sigma2, converged = line.split(",")
    assert float(q2) > 0 and float(sigma2) >= 0
    assert converged == "1"


def test_report_keys_match_schema(runner, tmp_path):
    out = tmp_path / "fit"
    result = runner.invoke(cli, [
        "estimate", "--k", "8", "--tac", str(DATA / "sample_tac.csv"),
        "--brac", str(DATA / "sample_brac.csv"), "-o", str(out), "-q",
    ])
    assert result.exit_code in (0, 2), result.output

    schema = json.loads((SCHEMAS / "fit_report.schema.json").read_text())
    report = json.loads((out / "fit_report.json").read_text())
    assert set(schema["required"]) <= set(report)
    assert report["template"] == "pde(k=8)"
    assert report["M"] == 29
    assert report["horizon_T"] == pytest.approx(6.3)
    if report["covariance"] is not None:
        assert np.all(np.linalg.eigvalsh(np.array(report["covariance"])) >= 0)
        assert report["ellipse"]["chi2_quantile"] == pytest.approx(5.9915, abs=1e-4)


def test_nonconvergence_exits_2(runner, tmp_path):
    config = extra_config(tmp_path, "max_iter: 1\nmultistart: false\n")
    tac, brac = simulate(runner, config, tmp_path / "sim", "--sigma", "0.001")
    out = tmp_path / "fit"
    result = runner.invoke(cli, [
        "estimate", "-c", str(config), "--tac", str(tac), "--brac", str(brac),
        "--q0", "5,0.05", "-o", str(out), "-q",
    ])
    assert result.exit_code == 2
    assert (out / "fit_report.json").exists()


@pytest.mark.parametrize("args", [
    ["estimate", "--tac", "missing.csv", "--brac", "missing.csv"],
    ["estimate", "--tac", str(DATA / "sample_tac.csv")],
    ["estimate", "--tac", str(DATA / "sample_tac.csv"), "--brac", str(DATA / "sample_brac.csv"), "--q0", "1,-1"],
    ["estimate", "--tac", str(DATA / "sample_tac.csv"), "--brac", str(DATA / "sample_brac.csv"), "--q0", "one,two"],
    ["gamma", "--tac", str(DATA / "sample_tac.csv")],
    ["simulate", "--m", "a,b"],
    ["simulate", "--k", "1"],
    ["simulate", "-c", "missing.yaml"],
])
def test_input_errors_exit_1(runner, tmp_path, args):
    result = runner.invoke(cli, [*args, "-o", str(tmp_path / "out"), "-q"])
    assert result.exit_code == 1


def test_gamma_report(runner, sim_config, tmp_path):
    out = tmp_path / "gamma"
    result = runner.invoke(cli, ["gamma", "-c", str(sim_config), "-o", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "gamma.json").read_text())
    gamma = np.array(report["gamma"])
    np.testing.assert_allclose(gamma, gamma.T)
    assert min(report["eigenvalues"]) > 0
    inv = np.array(report["sigma2_gamma_inv"])
    assert inv[0, 0] > 0 and inv[0, 1] < 0
    assert report["gamma_n"] is None


def test_gamma_with_session(runner, sim_config, tmp_path):
    tac, brac = simulate(runner, sim_config, tmp_path / "sim", "--sigma", "0.01")
    out = tmp_path / "gamma"
    result = runner.invoke(cli, ["gamma", "-c", str(sim_config), "--tac", str(tac), "--brac", str(brac), "-o", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "gamma.json").read_text())
    assert np.array(report["gamma_n"]).shape == (2, 2)


def test_gamma_without_drinks_exits_1(runner, tmp_path):
    config = extra_config(tmp_path, "mm:\n  dose_amount: 0.0\n")
    result = runner.invoke(cli, ["gamma", "-c", str(config), "-o", str(tmp_path / "gamma"), "-q"])
    assert result.exit_code == 1


def test_mc_table_noise_free(runner, sim_config, tmp_path):
    out = tmp_path / "mc"
    result = runner.invoke(cli, ["mc-table", "-c", str(sim_config), "--sigma", "0", "-n", "2", "-o", str(out)])
    assert result.exit_code == 0, result.output

    table = json.loads((out / "mc_table.json").read_text())
    assert [row["m"] for row in table["rows"]] == [20]
    row = table["rows"][0]
    np.testing.assert_allclose(row["scaled_cov"], np.zeros((2, 2)), atol=1e-10)
    np.testing.assert_allclose(row["mean_qhat"], [1.0, 1.0], atol=1e-6)
    assert row["mahalanobis_ks_pvalue"] is None
    replicates = pd.read_csv(out / "replicates.csv")
    assert len(replicates) == 2
    assert replicates["converged"].all()


def test_mc_table_several_m(runner, sim_config, tmp_path):
    out = tmp_path / "mc"
    result = runner.invoke(cli, [
        "mc-table", "-c", str(sim_config), "--sigma", "0.001", "--m", "20,40", "-n", "3", "-o", str(out), "-q",
    ])
    assert result.exit_code == 0, result.output
    table = json.loads((out / "mc_table.json").read_text())
    assert [row["m"] for row in table["rows"]] == [20, 40]
    assert len(pd.read_csv(out / "replicates.csv")) == 6


def test_mc_table_abort_exits_2(runner, tmp_path):
    config = extra_config(tmp_path, "max_iter: 1\nmultistart: false\ninit: [5.0, 0.05]\n")
    result = runner.invoke(cli, ["mc-table", "-c", str(config), "--sigma", "0.01", "-n", "4", "-o", str(tmp_path / "mc"), "-q"])
    assert result.exit_code == 2


@pytest.mark.parametrize("argv, code", [
    (["--version"], 0),
    (["estimate", "--k", "abc"], 1),
    (["no-such-command"], 1),
])
def test_main_exit_codes(argv, code):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == code


@pytest.mark.slow
def test_round_trip_at_pde_template(runner, tmp_path):
    config = tmp_path / "pde.yaml"
    config.write_text("discretization_k: 32\nq_true: [0.6341, 0.7826]\nsigma: 0.001\nm: 100\n")
    tac, brac = simulate(runner, config, tmp_path / "sim")
    out = tmp_path / "fit"
    result = runner.invoke(cli, [
        "estimate", "-c", str(config), "--tac", str(tac), "--brac", str(brac), "-o", str(out), "-q",
    ])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "fit_report.json").read_text())
    center = np.array(report["q_hat"])
    d = np.array([0.6341, 0.7826]) - center
    assert d @ np.linalg.solve(np.array(report["covariance"]), d) <= report["ellipse"]["chi2_quantile"]


@pytest.mark.slow
def test_shipped_sample_at_k32(runner, tmp_path):
    out = tmp_path / "fit"
    result = runner.invoke(cli, [
        "estimate", "-c", str(SCHEMAS / "sample_session.yaml"), "--tac", str(DATA / "sample_tac.csv"),
        "--brac", str(DATA / "sample_brac.csv"), "-o", str(out), "-q",
    ])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "fit_report.json").read_text())
    assert report["template"] == "pde(k=32)"
    assert np.all(np.linalg.eigvalsh(np.array(report["covariance"])) >= 0)
