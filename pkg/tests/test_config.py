import math
import warnings

import pytest

from epr_reservoir.config import DEFAULTS, load_config, paper_calibrated_gamma, parse_config
from epr_reservoir.errors import ConfigError, RegimeError, RegimeWarning

MINIMAL = """
[drive]
mu = 0.5
Omega = 1.0
g = 0.01
[protocol]
engine = master-equation
seed = 7
"""


def test_minimal_config_defaults():
    rc = parse_config(MINIMAL)
    assert rc.protocol.mu == 0.5
    assert rc.protocol.seed == 7
    assert rc.protocol.n_bar_inf == DEFAULTS["protocol"]["n_bar_inf"]
    assert rc.gamma_mode == "paper-calibrated"
    assert rc.gamma == pytest.approx(paper_calibrated_gamma())
    echo = rc.echo()
    assert "[reservoir]" in echo and "gamma = paper-calibrated" in echo
    assert "n_bar_inf = 0.01" in echo
    assert parse_config(echo).config_hash == rc.config_hash


def test_paper_calibrated_gamma():
    # 2T = 19 ms at mu = 0.97 from an empty cavity
    assert 1 / paper_calibrated_gamma() == pytest.approx(1.2886e-3, rel=1e-4)
    assert 2 * math.log(15.92047377326564 / 0.01) / paper_calibrated_gamma() == pytest.approx(19e-3)


def test_mu_one_rejected():
    with pytest.raises(RegimeError, match="line 3.*diverge"):
        parse_config("[drive]\nOmega = 1\nmu = 1.0\ng = 0.01\n")


def test_gamma_specified_twice():
    text = MINIMAL + "[reservoir]\ngamma = 1.0\nr_at = 10\ntau = 0.1\n"
    with pytest.raises(ConfigError, match="both") as exc:
        parse_config(text)
    assert exc.value.lineno is not None


def test_beam_route():
    rc = parse_config(MINIMAL + "[reservoir]\nr_at = 0.1\ntau = 0.5\n")
    ob = rc.protocol.step_params(1).Omega_b
    assert rc.gamma_mode == "beam"
    assert rc.gamma == pytest.approx(0.1 * (ob * 0.5) ** 2)


@pytest.mark.parametrize(
    "text, pattern",
    [
        ("[drive]\nmu = 0.5\nOmega = 1\n", "missing required key 'g'"),
        ("[drive]\nmu = 0.5\nOmega = 1\ng = 0.01\nfoo = 1\n", "line 5: unknown key"),
        ("[drive]\nmu = 0.5\nmu = 0.4\nOmega = 1\ng = 0.01\n", "line 3: duplicate"),
        ("[nowhere]\nmu = 0.5\n", "line 1: unknown section"),
        ("mu = 0.5\n", "outside"),
        ("[drive]\nmu 0.5\n", "expected 'key = value'"),
        ("[drive]\nmu = 0.5\nOmega = -1\ng = 0.01\n", "line 3"),
        (MINIMAL + "[reservoir]\nr_at = 3\n", "needs tau"),
        (MINIMAL + "[output]\nformat = xml\n", "one of"),
        (MINIMAL.replace("master-equation", "stochastic"), "needs \\[reservoir\\] tau"),
        (MINIMAL + "[numerics]\nn_max = 0\n", "n_max"),
    ],
)
def test_config_errors(text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        parse_config(text)


def test_comments_and_blank_lines():
    rc = parse_config("# header\n\n[drive]  # section\nmu = 0.3 # squeezing\nOmega = 2\ng = 0.01\n")
    assert rc.protocol.mu == 0.3
    assert rc.protocol.Omega == 2.0


def test_consistency_warnings():
    with pytest.warns(RegimeWarning):
        rc = parse_config("[drive]\nmu = 0.5\nOmega = 1\ng = 0.5\n")
    assert rc.warnings


def test_beam_warning_collected():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rc = parse_config(MINIMAL + "[reservoir]\ngamma = 1e-5\ntau = 100\n")
    assert any("Omega_b tau" in w for w in rc.warnings)


def test_load_config(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(MINIMAL + "[output]\nformat = json\n")
    rc = load_config(p)
    assert rc.out_format == "json"


def test_hash_changes_with_values():
    assert parse_config(MINIMAL).config_hash != parse_config(MINIMAL.replace("0.5", "0.4")).config_hash
