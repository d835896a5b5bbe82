import json
import math

import pytest

from epr_reservoir import cli
from epr_reservoir.config import paper_calibrated_gamma, parse_config
from epr_reservoir.datasets import decode

BASE = """
[drive]
mu = {mu}
Omega = 1.0
g = 0.01
[reservoir]
gamma = {gamma}
[numerics]
n_max = {n_max}
samples_per_step = 4
"""


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_params_097(tmp_path, capsys):
    cfg = _write(tmp_path, "[drive]\nmu = 0.97\nOmega = 1\ng = 0.001\n")
    code, out, _ = _run(capsys, "params", "--config", cfg, "--format", "json")
    assert code == 0
    vals = {row["quantity"]: row["value"] for row in json.loads(out)["data"]}
    assert vals["r_mu"] == pytest.approx(2.0923, abs=5e-4)
    assert vals["n_bar0"] == pytest.approx(15.92, abs=0.01)
    assert vals["gamma_T_step"] == pytest.approx(7.373, abs=1e-3)
    assert vals["two_T"] == pytest.approx(19e-3)


def test_params_dressed_chain(tmp_path, capsys):
    cfg = _write(tmp_path, "[drive]\nmu = 0.25\nOmega = 2\ng = 1\n")
    code, out, _ = _run(capsys, "params", "--config", cfg, "--format", "json")
    vals = {row["quantity"]: row["value"] for row in json.loads(out)["data"]}
    assert vals["Delta"] == pytest.approx(3.0)
    assert vals["Omega_b"] == pytest.approx(0.7746, abs=1e-4)
    assert vals["regime_ok"] == 0.0


def test_params_small_mu_limits(tmp_path, capsys):
    cfg = _write(tmp_path, "[drive]\nmu = 1e-6\nOmega = 1\ng = 0.01\n")
    code, out, _ = _run(capsys, "params", "--config", cfg, "--format", "json")
    vals = {row["quantity"]: row["value"] for row in json.loads(out)["data"]}
    assert vals["r_mu"] == pytest.approx(0.0, abs=1e-5)
    assert vals["Omega_b"] == pytest.approx(0.01, rel=1e-5)


def test_fig2a_endpoints(tmp_path, capsys):
    cfg = _write(tmp_path, BASE.format(mu=0.5, gamma="paper-calibrated", n_max=15))
    code, out, _ = _run(capsys, "fig2a", "--config", cfg)
    assert code == 0
    ds = decode(out, "csv")
    assert ds.columns == ["t_over_tau0", "t_seconds", "n_b1", "n_b2", "step"]
    t = ds.column("t_over_tau0")
    assert ds.column("n_b1")[0] == pytest.approx(1 / 3, rel=1e-6)
    end1 = t.index(min(t, key=lambda x: abs(x - math.log((1 / 3) / 0.01))))
    assert ds.column("n_b1")[end1] == pytest.approx(0.01, rel=1e-4)
    assert ds.column("t_seconds")[-1] == pytest.approx(t[-1] / paper_calibrated_gamma())
    assert ds.meta["config_hash"] == parse_config(open(cfg).read()).config_hash


def test_fig2b_columns_and_anchor(tmp_path, capsys):
    text = BASE.format(mu=0.97, gamma="paper-calibrated", n_max=10) + "[protocol]\nmu_grid = 0.5, 0.97\n"
    code, out, _ = _run(capsys, "fig2b", "--config", _write(tmp_path, text), "--format", "json")
    data = json.loads(out)["data"]
    assert [row["mu"] for row in data] == [0.5, 0.97]
    assert data[0]["n_bar"] == pytest.approx(0.3333, abs=1e-4)
    assert data[1]["n_bar"] == pytest.approx(15.92, abs=0.01)
    assert data[1]["two_T_seconds"] == pytest.approx(19.0e-3)


def test_fig2b_thermal(tmp_path, capsys):
    text = BASE.format(mu=0.97, gamma="paper-calibrated", n_max=10)
    text += "[protocol]\ninitial = thermal\nn_th = 0.7\nmu_grid = 0.97\n"
    code, out, _ = _run(capsys, "fig2b", "--config", _write(tmp_path, text), "--format", "json")
    row = json.loads(out)["data"][0]
    assert row["n_bar0"] == pytest.approx(38.91, abs=0.01)
    assert row["two_T_seconds"] == pytest.approx(21.3e-3, abs=0.05e-3)


def test_fig2b_gamma_models(tmp_path):
    rc = parse_config(BASE.format(mu=0.5, gamma=2.0, n_max=10))
    assert cli.gamma_of_mu(rc, 0.5) == pytest.approx(2.0)
    assert cli.gamma_of_mu(rc, 0.2) == pytest.approx(2.0 * (0.8 / 1.2) / (0.5 / 1.5))
    const = parse_config(BASE.format(mu=0.5, gamma="2.0\ngamma_model = constant", n_max=10))
    assert cli.gamma_of_mu(const, 0.2) == pytest.approx(2.0)


def test_protocol_deterministic_bytes(tmp_path, capsys):
    cfg = _write(tmp_path, BASE.format(mu=0.5, gamma=1.0, n_max=12))
    outs = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for o in outs:
        assert cli.main(["protocol", "--config", cfg, "--out", str(o)]) == 0
    assert outs[0].read_bytes() == outs[1].read_bytes()
    ds = decode(outs[0].read_text(), "csv")
    assert ds.meta["metrics"]["fidelity"] == pytest.approx(1 / 1.01**2, abs=2e-3)


def test_protocol_stochastic_ensemble(tmp_path, capsys):
    tau = 0.05 / (0.01 * math.sqrt(1 / 3))
    text = BASE.format(mu=0.5, gamma=1e-5, n_max=6).replace("gamma = 1e-05", f"gamma = 1e-5\ntau = {tau}")
    text += "[protocol]\nengine = stochastic\ntrajectories = 3\n"
    code, out, _ = _run(capsys, "protocol", "--config", _write(tmp_path, text), "--format", "json", "--seed", "5")
    assert code == 0
    obj = json.loads(out)
    assert obj["meta"]["seed"] == 5
    assert obj["meta"]["trajectories"] == 3
    assert "fidelity_sem" in obj["data"][0]


def test_validate_default_passes(tmp_path, capsys):
    cfg = _write(tmp_path, BASE.format(mu=0.5, gamma=1.0, n_max=20))
    code, out, err = _run(capsys, "validate", "--config", cfg, "--format", "json")
    rows = json.loads(out)["data"]
    assert code == 0, err
    assert all(r["passed"] for r in rows)
    assert {r["property"] for r in rows} >= {"leakage", "rwa_scaling", "jc_conjugation", "decay_law"}


def test_validate_undersized_cutoff(tmp_path, capsys):
    cfg = _write(tmp_path, BASE.format(mu=0.9, gamma=1.0, n_max=12))
    code, out, err = _run(capsys, "validate", "--config", cfg, "--format", "json")
    assert code == 3
    leak = [r for r in json.loads(out)["data"] if r["property"] == "leakage"][0]
    assert not leak["passed"]
    assert "raise [numerics] n_max to at least" in leak["detail"]
    assert "leakage" in err


def test_leakage_flag_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, BASE.format(mu=0.9, gamma=1.0, n_max=12))
    code, _, err = _run(capsys, "protocol", "--config", cfg)
    assert code == 3
    assert "truncation" in err


def test_exit_codes(tmp_path, capsys):
    assert _run(capsys, "params", "--config", str(tmp_path / "missing.ini"))[0] == 1
    bad = _write(tmp_path, "[drive]\nmu = 0.5\nOmega = 1\ng = 0.01\nfoo = 1\n")
    code, _, err = _run(capsys, "params", "--config", bad)
    assert code == 1 and "line 5" in err
    mu1 = _write(tmp_path, "[drive]\nmu = 1.0\nOmega = 1\ng = 0.01\n", "mu1.ini")
    code, _, err = _run(capsys, "params", "--config", mu1)
    assert code == 2 and "diverge" in err


def test_negative_seed_rejected(tmp_path, capsys):
    cfg = _write(tmp_path, BASE.format(mu=0.5, gamma=1.0, n_max=12))
    assert _run(capsys, "params", "--config", cfg, "--seed", "-1")[0] == 1


def test_output_section_used(tmp_path, capsys):
    out = tmp_path / "params.json"
    text = BASE.format(mu=0.5, gamma=1.0, n_max=12) + f"[output]\npath = {out}\nformat = json\n"
    assert _run(capsys, "params", "--config", _write(tmp_path, text))[0] == 0
    assert json.loads(out.read_text())["meta"]["command"] == "params"
