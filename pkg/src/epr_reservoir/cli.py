"""Command-line interface: ``epr-reservoir <command> --config PATH [--seed N] [--out PATH] [--format csv|json]``.

Commands: ``params``, ``fig2a``, ``fig2b``, ``protocol``, ``validate``.
Exit codes: 0 success, 1 configuration error, 2 physics-regime rejection,
3 numerical failure (leakage, integrator, failed property).
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
import warnings

import numpy as np

from . import datasets
from .config import CALIBRATION_MU, RunConfig, load_config
from .dressed import drive_for_mu, mode_frequencies, squeeze_params, squeeze_params_for_mu
from .errors import ConfigError, NumericalError, RegimeError, RegimeWarning, TruncationWarning
from .fock import (
    HilbertSpec,
    recommended_cutoff,
    squeeze_op,
    squeeze_sector_blocks,
    tmsv_amplitudes,
    top_level_population,
)
from .hamiltonians import bogoliubov_jc_hamiltonian, effective_hamiltonian, rwa_error
from .observables import _check_convention
from .protocol import (
    RECORD_COLUMNS,
    ProtocolConfig,
    initial_state,
    n_bar_initial,
    run_protocol,
    step_duration,
    stochastic_ensemble,
)
from .reservoir import KickChannel, lindblad_evolve
from .sectors import SectorState

EXIT_OK, EXIT_CONFIG, EXIT_REGIME, EXIT_NUMERICAL = 0, 1, 2, 3
DEFAULT_MU_GRID = tuple(round(0.05 * k, 2) for k in range(2, 20)) + (0.97,)


class CommandResult:
    def __init__(self, dataset, status=EXIT_OK, message=None):
        self.dataset = dataset
        self.status = status
        self.message = message


def _meta(rc: RunConfig, command, **extra):
    return datasets.provenance(rc.config_hash, rc.protocol.seed, command=command, **extra)


# --- params ------------------------------------------------------------------------


def cmd_params(rc: RunConfig) -> CommandResult:
    cfg = rc.protocol
    p = cfg.step_params(1)
    setup = mode_frequencies(rc.values["drive"].get("omegaL", 0.0), p.Delta, p.Omega)
    res = cfg.resolved_reservoir()
    gamma = res.gamma
    n0 = n_bar_initial(cfg.mu)
    n0_init = n_bar_initial(cfg.mu, cfg.n_th if cfg.initial == "thermal" else 0.0)
    T = step_duration(n0_init, cfg.n_bar_inf, gamma)
    rows = [
        ("mu", cfg.mu, "", "target squeezing control"),
        ("Delta", p.Delta, "rad/s", "Omega (1 - mu) / sqrt(mu), step 1 sign"),
        ("Omega", p.Omega, "rad/s", "classical drive"),
        ("g", p.g, "rad/s", "cavity coupling"),
        ("d", p.d, "rad/s", "sqrt(Delta^2 + 4 Omega^2)"),
        ("theta", p.theta, "rad", "tan(theta) = 2 Omega / (d - Delta)"),
        ("tan_theta", p.tan_theta, "", ""),
        ("r_mu", p.r_mu, "", "artanh(mu)"),
        ("Omega_b", p.Omega_b, "rad/s", "g sqrt((1 - mu) / (1 + mu))"),
        ("omega1", setup.omega1, "rad/s", "omegaL - d"),
        ("omega2", setup.omega2, "rad/s", "omegaL + d"),
        ("delta1", setup.delta1, "rad/s", "omegaL - omega1 = d"),
        ("delta2", setup.delta2, "rad/s", "omegaL - omega2 = -d"),
        ("gamma", gamma, "1/s", rc.gamma_mode),
        ("tau0", 1.0 / gamma, "s", "1 / gamma"),
        ("n_bar0_vacuum", n0, "", "mu^2 / (1 - mu^2)"),
        ("n_bar0", n0_init, "", "initial b occupation per mode"),
        ("gamma_T_step", gamma * T, "", "|ln(n_inf / n_bar0)|"),
        ("T_step", T, "s", ""),
        ("two_T", 2 * T, "s", "both steps"),
        ("g_over_d", p.g / p.d, "", f"regime_ok = {p.regime_ok}"),
        ("g_over_Omega", p.g / p.Omega, "", "should be << 1"),
        ("regime_ok", float(p.regime_ok), "", f"g/d < {rc.regime_tol}"),
    ]
    if res.tau is not None:
        rows += [
            ("tau", res.tau, "s", "interaction time"),
            ("r_at", res.r_at, "1/s", "arrival rate"),
            ("Omega_b_tau", res.Omega_b * res.tau, "", "should be < 0.2"),
            ("r_at_tau", res.r_at * res.tau, "", "should be < 0.1"),
        ]
    ds = datasets.make_dataset(("quantity", "value", "unit", "note"), rows, _meta(rc, "params"))
    return CommandResult(ds)


# --- figures ---------------------------------------------------------------------------


def cmd_fig2a(rc: RunConfig) -> CommandResult:
    result = run_protocol(rc.protocol)
    rec = result.records
    gamma = result.gamma
    cols = ("t_over_tau0", "t_seconds", "n_b1", "n_b2", "step")
    data = {
        "t_over_tau0": rec["gamma_t"],
        "t_seconds": rec["time"],
        "n_b1": rec["n_b1"],
        "n_b2": rec["n_b2"],
        "step": rec["step"],
    }
    meta = _meta(
        rc,
        "fig2a",
        engine=rc.protocol.engine,
        fidelity=result.metrics.fidelity,
        gamma=gamma,
        gamma_T1=gamma * result.T1,
        gamma_T2=gamma * result.T2,
        two_T_seconds=result.total_time,
        truncation_suspect=result.truncation_suspect,
    )
    return _flagged(datasets.make_dataset(cols, data, meta), result.truncation_suspect)


def gamma_of_mu(rc: RunConfig, mu) -> float:
    """Damping rate at squeezing ``mu`` for a fixed atomic beam.

    ``gamma = r_at g^2 tau^2 (1 - mu) / (1 + mu)``: the beam (r_at, tau, g)
    is held fixed and only ``Omega_b^2`` changes with ``mu``. The scale is
    anchored at mu = 0.97 for the calibrated rate and at the configured
    mu otherwise. ``gamma_model = constant`` keeps ``gamma`` fixed instead.
    """
    ref_mu = CALIBRATION_MU if rc.gamma_mode == "paper-calibrated" else rc.protocol.mu
    gamma_ref = rc.gamma
    if rc.gamma_model == "constant":
        return gamma_ref
    shape = lambda m: (1.0 - m) / (1.0 + m)  # noqa: E731
    return gamma_ref * shape(mu) / shape(ref_mu)


def cmd_fig2b(rc: RunConfig) -> CommandResult:
    cfg = rc.protocol
    grid = rc.mu_grid or DEFAULT_MU_GRID
    n_th = cfg.n_th if cfg.initial == "thermal" else 0.0
    rows = []
    for mu in grid:
        if not 0 < mu < 1:
            raise RegimeError(f"mu = {mu} in the grid lies outside (0, 1)")
        gamma = gamma_of_mu(rc, mu)
        n_bar = n_bar_initial(mu)
        n0 = n_bar_initial(mu, n_th)
        two_t = 2.0 * step_duration(n0, cfg.n_bar_inf, gamma)
        rows.append((mu, n_bar, n0, gamma, two_t))
    meta = _meta(rc, "fig2b", gamma_mode=rc.gamma_mode, gamma_model=rc.gamma_model, n_th=n_th)
    ds = datasets.make_dataset(("mu", "n_bar", "n_bar0", "gamma", "two_T_seconds"), rows, meta)
    return CommandResult(ds)


def _flagged(ds, suspect):
    if suspect:
        return CommandResult(ds, EXIT_NUMERICAL, "truncation leakage above threshold: result is truncation-suspect")
    return CommandResult(ds)


# --- protocol --------------------------------------------------------------------------


def cmd_protocol(rc: RunConfig) -> CommandResult:
    cfg = rc.protocol
    if cfg.engine == "stochastic" and rc.trajectories > 1:
        n_points = 2 * cfg.samples_per_step + 1
        ens = stochastic_ensemble(cfg, rc.trajectories)
        times = np.linspace(0.0, ens.T1 + ens.T2, n_points)
        ens = stochastic_ensemble(cfg, rc.trajectories, times)
        data = {"time": ens.times, "gamma_t": ens.gamma * ens.times}
        cols = ["time", "gamma_t"]
        for c in ("n_b1", "n_b2", "fidelity"):
            data[c + "_mean"] = ens.mean[c]
            data[c + "_sem"] = ens.sem[c]
            cols += [c + "_mean", c + "_sem"]
        meta = _meta(
            rc,
            "protocol",
            engine=cfg.engine,
            trajectories=rc.trajectories,
            gamma=ens.gamma,
            T1=ens.T1,
            T2=ens.T2,
            final_fidelity_mean=float(ens.mean["fidelity"][-1]),
            final_fidelity_sem=float(ens.sem["fidelity"][-1]),
        )
        return CommandResult(datasets.make_dataset(cols, data, meta))
    result = run_protocol(cfg)
    meta = _meta(
        rc,
        "protocol",
        engine=cfg.engine,
        basis=cfg.basis,
        gamma=result.gamma,
        T1=result.T1,
        T2=result.T2,
        two_T=result.total_time,
        n_kicks=list(result.n_kicks),
        truncation_suspect=result.truncation_suspect,
        metrics=result.metrics.as_dict(),
    )
    ds = datasets.make_dataset(RECORD_COLUMNS, result.records, meta)
    return _flagged(ds, result.truncation_suspect)


# --- validate --------------------------------------------------------------------------


def _prop_dressed_round_trip(rc):
    mu = rc.protocol.mu
    p = squeeze_params(drive_for_mu(mu, rc.protocol.Omega, 1), rc.protocol.Omega, rc.protocol.g)
    err = abs(p.mu - mu)
    return err < 1e-10, err, "drive_for_mu -> squeeze_params recovers mu"


def _prop_tmsv_series(rc):
    r = rc.protocol.r
    n = rc.protocol.cutoff()
    # double the cutoff: the truncated generator only distorts levels near its edge
    block = squeeze_sector_blocks(r, 2 * n, 2 * n, inverse=True, charges=(0,))[0]
    err = float(np.max(np.abs(block[: n + 1, 0] - tmsv_amplitudes(r, n))))
    return err < 1e-8, err, f"S^dag|0,0> against sech(r) tanh(r)^n up to level {n}"


def _prop_unitarity(rc):
    s = squeeze_op(0.5, HilbertSpec(20, 20))
    err = float(np.max(np.abs(s.T @ s - np.eye(s.shape[0]))))
    return err < 1e-8, err, "squeeze_op(0.5) unitary at cutoff 20"


def _prop_leakage(rc):
    cfg = rc.protocol
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        state = initial_state(cfg)
    leak = top_level_population(state)
    n = state.spec.n_max1
    need = recommended_cutoff(n_bar_initial(cfg.mu, cfg.n_th if cfg.initial == "thermal" else 0.0))
    ok = leak < rc.leakage_threshold
    detail = f"initial state top-level population at cutoff {n}"
    if not ok:
        detail += f" exceeds {rc.leakage_threshold:.0e}; raise [numerics] n_max to at least {need}"
    return ok, leak, detail


def _prop_epr_convention(rc):
    return bool(_check_convention()), 0.0, "quadrature convention self-test (TMSV gives 2 exp(-2r))"


def _prop_jc_conjugation(rc):
    p = squeeze_params_for_mu(0.3, 1.0, 0.01)
    spec = HilbertSpec(15, 15, True)
    s = np.kron(squeeze_op(p.r_mu, spec.field_only(), threshold=np.inf), np.eye(2))
    diff = s @ effective_hamiltonian(p, p.g, spec) @ s.T - bogoliubov_jc_hamiltonian(p, spec)
    low = [i for i in range(spec.dim) if (i // 2) // 16 < 5 and (i // 2) % 16 < 5]
    err = float(np.max(np.abs(diff[np.ix_(low, low)])))
    return err < 1e-6, err, "S H_eff S^dag equals the Jaynes-Cummings form (mu=0.3, cutoff 15)"


def _prop_kick_expansion(rc):
    p = squeeze_params_for_mu(0.5, 1.0, 0.01)
    fs = HilbertSpec(6, 2)
    x = 1e-3
    ch = KickChannel.from_hamiltonian(bogoliubov_jc_hamiltonian(p, fs.with_atom(), free=False), x / p.Omega_b, "+", fs)
    rng = np.random.default_rng(1)
    a = rng.normal(size=(fs.dim, fs.dim)) + 1j * rng.normal(size=(fs.dim, fs.dim))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    b = np.kron(np.diag(np.sqrt(np.arange(1, 7)), 1), np.eye(3))
    nb = b.T @ b
    want = -(x**2) / 2 * (nb @ rho - 2 * b @ rho @ b.T + rho @ nb)
    got = ch.apply(rho) - rho
    err = float(np.max(np.abs(got - want)) / np.max(np.abs(want)))
    return err < 1e-4, err, "one kick at Omega_b tau = 1e-3 against the damping generator"


def _prop_decay_law(rc):
    p = squeeze_params_for_mu(0.5, 1.0, 0.01)
    n = 12
    amps = tmsv_amplitudes(p.r_mu, n) * (-1.0) ** np.arange(n + 1)
    st = SectorState.from_pure_diagonal(amps / np.linalg.norm(amps), n, n, "b", p.r_mu)
    n0 = st.mean_number(1)
    worst = 0.0
    for gt in np.linspace(0.0, 8.0, 9)[1:]:
        nt = lindblad_evolve(st, 1.0, 1, gt).mean_number(1)
        worst = max(worst, abs(nt / (n0 * math.exp(-gt)) - 1))
    return worst < 1e-8, worst, "<b1^dag b1>_t = n0 exp(-gamma t) over gamma t in [0, 8]"


def _prop_rwa_scaling(rc):
    ratio = rwa_scaling_ratio()
    return 1.5 <= ratio <= 3.0, ratio, "rwa_error(g) / rwa_error(g/2) at g/d = 0.01, mu = 0.3"


def rwa_scaling_ratio(mu=0.3, g_over_d=0.01, kick_angle=0.1, n_max=6, **kw):
    """Two-point ratio ``rwa_error(g) / rwa_error(g/2)`` at fixed drive and fixed ``tau``."""
    base = squeeze_params_for_mu(mu, 1.0, 1.0)
    g = g_over_d * base.d
    p = squeeze_params(base.Delta, 1.0, g)
    tau = kick_angle / p.Omega_b
    spec = HilbertSpec(n_max, n_max, True)
    e1 = rwa_error(p, g, spec, tau, **kw)
    e2 = rwa_error(squeeze_params(base.Delta, 1.0, g / 2), g / 2, spec, tau, **kw)
    return e1 / e2


PROPERTIES = (
    ("dressed_round_trip", _prop_dressed_round_trip),
    ("tmsv_series", _prop_tmsv_series),
    ("squeeze_unitarity", _prop_unitarity),
    ("leakage", _prop_leakage),
    ("epr_convention", _prop_epr_convention),
    ("jc_conjugation", _prop_jc_conjugation),
    ("kick_expansion", _prop_kick_expansion),
    ("decay_law", _prop_decay_law),
    ("rwa_scaling", _prop_rwa_scaling),
)


def cmd_validate(rc: RunConfig) -> CommandResult:
    rows = []
    for name, fn in PROPERTIES:
        try:
            ok, value, detail = fn(rc)
        except (NumericalError, ValueError, AssertionError) as exc:
            ok, value, detail = False, float("nan"), f"{type(exc).__name__}: {exc}"
        rows.append((name, bool(ok), float(value), detail))
    ds = datasets.make_dataset(("property", "passed", "value", "detail"), rows, _meta(rc, "validate"))
    failed = [r[0] for r in rows if not r[1]]
    if failed:
        msgs = "; ".join(f"{r[0]}: {r[3]}" for r in rows if not r[1])
        return CommandResult(ds, EXIT_NUMERICAL, f"failed properties: {msgs}")
    return CommandResult(ds)


COMMANDS = {
    "params": cmd_params,
    "fig2a": cmd_fig2a,
    "fig2b": cmd_fig2b,
    "protocol": cmd_protocol,
    "validate": cmd_validate,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="epr-reservoir", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="configuration file")
    parser.add_argument("--seed", type=int, help="override [protocol] seed")
    parser.add_argument("--out", help="output file (default: standard output)")
    parser.add_argument("--format", choices=("csv", "json"), help="override [output] format")
    return parser


def _with_seed(rc: RunConfig, seed) -> RunConfig:
    if seed is None:
        return rc
    if seed < 0:
        raise ConfigError("--seed must be non-negative")
    values = {k: dict(v) for k, v in rc.values.items()}
    values["protocol"]["seed"] = seed
    return dataclasses.replace(rc, protocol=dataclasses.replace(rc.protocol, seed=seed), values=values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            rc = load_config(args.config)
        for msg in rc.warnings:
            print(f"warning: {msg}", file=sys.stderr)
        rc = _with_seed(rc, args.seed)
        with warnings.catch_warnings():
            # regime warnings were reported above, once
            warnings.simplefilter("ignore", RegimeWarning)
            result = COMMANDS[args.command](rc)
        fmt = args.format or rc.out_format
        text = datasets.encode(result.dataset, fmt)
        out = args.out or rc.out_path
        if out:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        if result.message:
            print(f"error: {result.message}", file=sys.stderr)
        return result.status
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RegimeError as exc:
        print(f"regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
