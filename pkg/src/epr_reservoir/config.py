"""Run configuration: a line-oriented ``key = value`` format with ``[section]`` headers.

Sections and keys (``#`` starts a comment)::

    [drive]       mu, Omega, g, omegaL, regime_tol
    [reservoir]   gamma (number or "paper-calibrated"), r_at, tau, jitter_std, gamma_model
    [protocol]    n_bar_inf, initial (vacuum | thermal), n_th, engine, basis, seed,
                  trajectories, mu_grid
    [numerics]    n_max, samples_per_step, log_negativity, leakage_threshold
    [output]      path, format (csv | json)

Only ``mu``, ``Omega`` and ``g`` are required. The damping rate is given in
exactly one way: an explicit ``gamma``, ``gamma = paper-calibrated`` (the
default), or ``r_at`` together with ``tau``. ``tau`` may accompany an
explicit or calibrated ``gamma``; the stochastic engine then derives the
arrival rate from ``gamma = r_at Omega_b^2 tau^2``.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field

from .dressed import REGIME_TOL, DriveParams, squeeze_params_for_mu
from .errors import ConfigError, DegenerateDriveError, RegimeError, RegimeWarning
from .fock import LEAKAGE_THRESHOLD
from .protocol import ENGINES, ProtocolConfig, n_bar_initial
from .reservoir import ReservoirParams

# 2T = 19 ms for an empty cavity at mu = 0.97 and n_inf = 0.01
CALIBRATION_MU = 0.97
CALIBRATION_N_INF = 0.01
CALIBRATION_TWO_T = 19e-3


def paper_calibrated_gamma() -> float:
    """Damping rate (1/s) that makes the empty-cavity protocol at mu = 0.97 last 19 ms."""
    n0 = n_bar_initial(CALIBRATION_MU)
    return 2.0 * math.log(n0 / CALIBRATION_N_INF) / CALIBRATION_TWO_T


def _float(v):
    return float(v)


def _pos(v):
    x = float(v)
    if not x > 0:
        raise ValueError(f"must be positive, got {v}")
    return x


def _nonneg(v):
    x = float(v)
    if x < 0:
        raise ValueError(f"must be non-negative, got {v}")
    return x


def _int(v):
    return int(v)


def _seed(v):
    x = int(v)
    if x < 0:
        raise ValueError(f"must be a non-negative integer, got {v}")
    return x


def _bool(v):
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v}")


def _choice(*options):
    def conv(v):
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}; got {v!r}")
        return v

    return conv


def _grid(v):
    return tuple(float(x) for x in v.replace(",", " ").split())


def _gamma(v):
    if v.strip().lower() == "paper-calibrated":
        return "paper-calibrated"
    return _pos(v)


SCHEMA = {
    "drive": {"mu": _float, "Omega": _pos, "g": _pos, "omegaL": _float, "regime_tol": _pos},
    "reservoir": {
        "gamma": _gamma,
        "r_at": _pos,
        "tau": _pos,
        "jitter_std": _nonneg,
        "gamma_model": _choice("fixed-beam", "constant"),
    },
    "protocol": {
        "n_bar_inf": _pos,
        "initial": _choice("vacuum", "thermal"),
        "n_th": _nonneg,
        "engine": _choice(*ENGINES),
        "basis": _choice("a", "b"),
        "seed": _seed,
        "trajectories": _int,
        "mu_grid": _grid,
    },
    "numerics": {
        "n_max": _int,
        "samples_per_step": _int,
        "log_negativity": _bool,
        "leakage_threshold": _pos,
    },
    "output": {"path": str, "format": _choice("csv", "json")},
}
REQUIRED = (("drive", "mu"), ("drive", "Omega"), ("drive", "g"))


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration for every CLI command."""

    protocol: ProtocolConfig
    gamma_mode: str  # "explicit" | "paper-calibrated" | "beam"
    gamma_model: str = "fixed-beam"
    trajectories: int = 1
    mu_grid: tuple = ()
    out_path: str | None = None
    out_format: str = "csv"
    leakage_threshold: float = LEAKAGE_THRESHOLD
    regime_tol: float = REGIME_TOL
    values: dict = field(default_factory=dict, compare=False)
    warnings: tuple = ()

    @property
    def gamma(self) -> float:
        return self.protocol.gamma

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.values, sort_keys=True, default=str)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def echo(self) -> str:
        """Documented echo of the effective settings (defaults filled in)."""
        lines = []
        for section in SCHEMA:
            lines.append(f"[{section}]")
            for key, value in sorted(self.values.get(section, {}).items()):
                if isinstance(value, tuple):
                    value = ", ".join(repr(v) for v in value)
                lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


DEFAULTS = {
    "drive": {"regime_tol": REGIME_TOL},
    "reservoir": {"jitter_std": 0.0, "gamma_model": "fixed-beam"},
    "protocol": {
        "n_bar_inf": 0.01,
        "initial": "vacuum",
        "n_th": 0.0,
        "engine": "master-equation",
        "basis": "b",
        "seed": 0,
        "trajectories": 1,
        "mu_grid": (),
    },
    "numerics": {"samples_per_step": 40, "log_negativity": False, "leakage_threshold": LEAKAGE_THRESHOLD},
    "output": {"format": "csv"},
}


def _tokenize(text):
    section = None
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]; expected one of {', '.join(SCHEMA)}", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any [section]", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if (section, key) in seen:
            raise ConfigError(f"duplicate key {key!r} in [{section}] (first on line {seen[(section, key)]})", lineno)
        seen[(section, key)] = lineno
        yield section, key, value, lineno


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration.

    Raises :class:`ConfigError` (with the offending line number where one
    exists) for syntax errors, unknown or missing keys and inconsistent
    damping-rate settings, and :class:`RegimeError` for physically
    excluded drives such as ``mu = 1``. Consistency warnings (g/Omega,
    g/d, Omega_b tau, r_at tau) are collected in ``RunConfig.warnings``
    and also emitted.
    """
    values = {s: dict(d) for s, d in DEFAULTS.items()}
    lines = {}
    for section, key, raw, lineno in _tokenize(text):
        try:
            values[section][key] = SCHEMA[section][key](raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}", lineno) from None
        lines[(section, key)] = lineno
    for section, key in REQUIRED:
        if key not in values[section]:
            raise ConfigError(f"missing required key {key!r} in [{section}]")

    drive, res, proto, num, out = (values[s] for s in SCHEMA)
    mu = drive["mu"]
    if mu >= 1.0:
        raise RegimeError(
            f"line {lines[('drive', 'mu')]}: mu = {mu} is rejected: mu -> 1 makes r_mu = artanh(mu) diverge "
            "(degenerate drive)"
        )
    if not mu > 0:
        raise ConfigError(f"mu must lie in (0, 1), got {mu}", lines[("drive", "mu")])
    for key in ("trajectories", "samples_per_step"):
        sect = "protocol" if key == "trajectories" else "numerics"
        if values[sect][key] < 1:
            raise ConfigError(f"{key} must be >= 1", lines.get((sect, key)))
    if "n_max" in num and num["n_max"] < 1:
        raise ConfigError("n_max must be >= 1", lines.get(("numerics", "n_max")))
    for m in proto["mu_grid"]:
        if not 0 < m < 1:
            raise RegimeError(f"line {lines[('protocol', 'mu_grid')]}: mu_grid value {m} outside (0, 1)")

    has_gamma = "gamma" in res
    has_rat = "r_at" in res
    if has_gamma and has_rat:
        raise ConfigError(
            "gamma is specified both explicitly and via r_at (with tau); give exactly one",
            lines[("reservoir", "r_at")],
        )
    if has_rat and "tau" not in res:
        raise ConfigError("r_at needs tau to derive gamma = r_at Omega_b^2 tau^2", lines[("reservoir", "r_at")])
    if has_rat:
        gamma_mode = "beam"
    elif has_gamma and res["gamma"] != "paper-calibrated":
        gamma_mode = "explicit"
    else:
        gamma_mode = "paper-calibrated"
        res["gamma"] = "paper-calibrated"

    caught = []
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        try:
            p = squeeze_params_for_mu(mu, drive["Omega"], drive["g"], regime_tol=drive["regime_tol"])
        except DegenerateDriveError as exc:
            raise RegimeError(f"line {lines[('drive', 'mu')]}: {exc}") from None
        DriveParams(drive["Omega"], drive["g"], p.Delta)  # g/Omega check
        if not p.regime_ok:
            warnings.warn(RegimeWarning(f"g/d = {p.g / p.d:.3g} is not below {drive['regime_tol']}"))
        if gamma_mode == "beam":
            reservoir = ReservoirParams(
                r_at=res["r_at"], tau=res["tau"], jitter_std=res["jitter_std"], Omega_b=p.Omega_b
            )
        else:
            gamma = paper_calibrated_gamma() if gamma_mode == "paper-calibrated" else res["gamma"]
            reservoir = ReservoirParams(gamma=gamma, tau=res.get("tau"), jitter_std=res["jitter_std"])
            reservoir = reservoir.with_coupling(p.Omega_b)  # runs the beam checks when tau is known
        caught = [str(x.message) for x in w if issubclass(x.category, RegimeWarning)]
    for msg in caught:
        warnings.warn(RegimeWarning(msg), stacklevel=2)

    if proto["engine"] == "stochastic" and reservoir.tau is None:
        raise ConfigError("the stochastic engine needs [reservoir] tau")
    proto_cfg = ProtocolConfig(
        mu=mu,
        Omega=drive["Omega"],
        g=drive["g"],
        reservoir=reservoir,
        n_bar_inf=proto["n_bar_inf"],
        initial=proto["initial"],
        n_th=proto["n_th"],
        n_max=num.get("n_max"),
        seed=proto["seed"],
        engine=proto["engine"],
        basis=proto["basis"],
        samples_per_step=num["samples_per_step"],
        log_negativity=num["log_negativity"],
    )
    return RunConfig(
        protocol=proto_cfg,
        gamma_mode=gamma_mode,
        gamma_model=res["gamma_model"],
        trajectories=proto["trajectories"],
        mu_grid=proto["mu_grid"],
        out_path=out.get("path"),
        out_format=out["format"],
        leakage_threshold=num["leakage_threshold"],
        regime_tol=drive["regime_tol"],
        values=values,
        warnings=tuple(caught),
    )


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
