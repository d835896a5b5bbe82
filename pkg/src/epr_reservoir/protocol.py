"""Two-step reservoir protocol: damp b1 with |+> atoms, then b2 with |-> atoms.

Two engines drive the same schedule:

* ``"master-equation"`` - exact damping propagators (b basis) or adaptive
  integration (a basis);
* ``"stochastic"`` - one Kraus kick per atom at Poisson arrival times,
  evaluated in the interaction picture of ``H0 = d (pi_z/2 - n1 + n2)``.
  The b-basis coupling commutes with ``H0``, so between arrivals nothing
  happens to the field.

Step durations come from the duration law ``T = |ln(n_inf / n_0)| / gamma``
with ``n_0`` the b-mode occupation at the start of the step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dressed import DriveParams, dressed_states, drive_for_mu, squeeze_params
from .errors import RegimeError, RegimeWarning
from .fock import (
    LEAKAGE_THRESHOLD,
    HilbertSpec,
    QuantumState,
    basis_transform,
    check_leakage,
    recommended_cutoff,
    tmsv_amplitudes,
    top_level_population,
)
from .hamiltonians import (
    PI_Z,
    atom_op,
    bogoliubov_jc_hamiltonian,
    effective_hamiltonian,
    JitterCoupling,
    physical_mode_ops,
)
from .observables import Moments, metrics_report, moments, stored_moments, vacuum_fidelity
from .reservoir import KickChannel, ReservoirParams, lindblad_evolve, poisson_arrivals
from .sectors import SectorState

RECORD_COLUMNS = ("time", "gamma_t", "step", "n_b1", "n_b2", "n_a1", "n_a2", "leakage")
ENGINES = ("master-equation", "stochastic")


def n_bar_initial(mu, n_th=0.0) -> float:
    """b-mode occupation of a thermal (or vacuum) physical state: ``n_th (1+mu^2)/(1-mu^2) + mu^2/(1-mu^2)``."""
    if not 0 <= mu < 1:
        raise RegimeError(f"mu must lie in [0, 1), got {mu}")
    return (n_th * (1 + mu * mu) + mu * mu) / (1 - mu * mu)


def step_duration(n0, n_inf, gamma) -> float:
    """``|ln(n_inf / n0)| / gamma``; zero when the mode is already empty or on target."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if not n_inf > 0:
        raise ValueError("target occupation must be positive")
    if n0 <= 0:
        return 0.0
    return abs(math.log(n_inf / n0)) / gamma


@dataclass(frozen=True)
class ProtocolConfig:
    """Everything that defines one protocol run.

    ``initial`` is ``"vacuum"``, ``"thermal"`` (physical modes at ``n_th``
    each) or a ready-made state. ``n_max`` defaults to
    :func:`~epr_reservoir.fock.recommended_cutoff` of the initial b
    occupation.
    """

    mu: float
    Omega: float = 1.0
    g: float = 0.01
    reservoir: ReservoirParams = field(default_factory=lambda: ReservoirParams(gamma=1.0))
    n_bar_inf: float = 0.01
    initial: object = "vacuum"
    n_th: float = 0.0
    n_max: int | None = None
    seed: int = 0
    engine: str = "master-equation"
    basis: str = "b"
    samples_per_step: int = 40
    log_negativity: bool = False

    def __post_init__(self):
        if not 0 < self.mu < 1:
            raise RegimeError(f"mu must lie in (0, 1); mu = {self.mu} diverges or is trivial")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        if self.basis not in ("a", "b"):
            raise ValueError("basis must be 'a' or 'b'")
        if not self.n_bar_inf > 0:
            raise ValueError("n_bar_inf must be positive")
        if self.samples_per_step < 1:
            raise ValueError("samples_per_step must be >= 1")

    @property
    def drive(self) -> DriveParams:
        return DriveParams(self.Omega, self.g, drive_for_mu(self.mu, self.Omega, +1))

    def step_params(self, step):
        """Dressed parameters of the given step (detuning sign +1, then -1)."""
        sign = 1 if step == 1 else -1
        return squeeze_params(sign * abs(self.drive.Delta), self.Omega, self.g)

    @property
    def r(self) -> float:
        return math.atanh(self.mu)

    def resolved_reservoir(self) -> ReservoirParams:
        return self.reservoir.with_coupling(self.step_params(1).Omega_b)

    @property
    def gamma(self) -> float:
        return self.resolved_reservoir().gamma

    def cutoff(self) -> int:
        if self.n_max is not None:
            return int(self.n_max)
        if isinstance(self.initial, str):
            n0 = n_bar_initial(self.mu, self.n_th if self.initial == "thermal" else 0.0)
        else:
            m = _b_moments(self.initial, self.r)
            n0 = max(m.n1, m.n2)
        return recommended_cutoff(n0)


@dataclass
class ProtocolResult:
    records: dict
    final_state: object
    metrics: object
    T1: float
    T2: float
    gamma: float
    truncation_suspect: bool = False
    n_kicks: tuple = (0, 0)

    @property
    def total_time(self) -> float:
        """``2T``, the duration of both steps."""
        return self.T1 + self.T2

    def rows(self):
        return [dict(zip(RECORD_COLUMNS, vals)) for vals in zip(*(self.records[c] for c in RECORD_COLUMNS))]


def _b_moments(state, r) -> Moments:
    if state.basis == "b":
        return stored_moments(state)
    return moments(state, "b", r)


# --- initial states -------------------------------------------------------------


def initial_state(config: ProtocolConfig, n_max=None):
    """Initial field in the simulation basis (b-basis states as :class:`SectorState` when possible)."""
    n_max = config.cutoff() if n_max is None else n_max
    r = config.r
    init = config.initial
    if isinstance(init, str):
        if init == "vacuum":
            if config.basis == "a":
                return SectorState.thermal(0.0, 0.0, n_max, n_max)
            # S(r)|0,0>: alternating TMSV amplitudes
            amps = tmsv_amplitudes(r, n_max) * (-1.0) ** np.arange(n_max + 1)
            amps = amps / np.linalg.norm(amps)
            return SectorState.from_pure_diagonal(amps, n_max, n_max, "b", r)
        if init == "thermal":
            st = SectorState.thermal(config.n_th, config.n_th, n_max, n_max)
            if config.basis == "a":
                return st
            return basis_transform(st, r, "a->b")
        raise ValueError(f"unknown initial state {init!r}")
    st = init
    if isinstance(st, QuantumState) and not st.is_pure:
        try:
            st = SectorState.from_dense(st)
        except ValueError:
            pass
    if st.basis != config.basis:
        st = basis_transform(st, r, "a->b" if config.basis == "b" else "b->a")
    return st


# --- records ----------------------------------------------------------------------


class _Recorder:
    def __init__(self, r, gamma):
        self.r = r
        self.gamma = gamma
        self.rows = []
        self.suspect = False

    def __call__(self, t, step, state):
        mb = _b_moments(state, self.r)
        ma = mb.bogoliubov(self.r)
        leak = top_level_population(state)
        if leak > LEAKAGE_THRESHOLD:
            self.suspect = True
        self.rows.append((t, self.gamma * t, step, mb.n1, mb.n2, ma.n1, ma.n2, leak))

    def columns(self):
        arr = np.array(self.rows, dtype=float).reshape(-1, len(RECORD_COLUMNS))
        out = {c: arr[:, i] for i, c in enumerate(RECORD_COLUMNS)}
        out["step"] = out["step"].astype(int)
        return out


def _durations(config, state):
    gamma = config.gamma
    if isinstance(config.initial, str):
        # named initial states: exact occupation, free of truncation
        n1 = n2 = n_bar_initial(config.mu, config.n_th if config.initial == "thermal" else 0.0)
    else:
        m = _b_moments(state, config.r)
        n1, n2 = m.n1, m.n2
    return step_duration(n1, config.n_bar_inf, gamma), step_duration(n2, config.n_bar_inf, gamma)


def _finish(config, state, recorder, T1, T2, kicks=(0, 0)):
    suspect = recorder.suspect or getattr(state, "truncation_suspect", False)
    if check_leakage(state, where="protocol endpoint"):
        suspect = True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        metrics = metrics_report(state, config.r, with_log_negativity=config.log_negativity)
    return ProtocolResult(
        records=recorder.columns(),
        final_state=state,
        metrics=metrics,
        T1=T1,
        T2=T2,
        gamma=config.gamma,
        truncation_suspect=suspect,
        n_kicks=kicks,
    )


# --- master-equation engine -----------------------------------------------------------


def _me_run(config: ProtocolConfig, state):
    gamma = config.gamma
    r = config.r
    T1, T2 = _durations(config, state)
    rec = _Recorder(r, gamma)
    rec(0.0, 1, state)
    t0 = 0.0
    method = "exact" if config.basis == "b" else "adaptive"
    for step, T in ((1, T1), (2, T2)):
        if T == 0:
            continue
        dt = T / config.samples_per_step
        for i in range(1, config.samples_per_step + 1):
            state = lindblad_evolve(state, gamma, step, dt, method=method, r=r)
            rec(t0 + i * dt, step, state)
        t0 += T
    return _finish(config, state, rec, T1, T2)


# --- stochastic engine -------------------------------------------------------------------


def _dense(state):
    if isinstance(state, SectorState):
        state = state.to_dense()
    if state.is_pure:
        state = state.replace(state.density_matrix())
    return state


def interaction_hamiltonian(config: ProtocolConfig, step, spec: HilbertSpec, actual=None):
    """Kick Hamiltonian (interaction picture) on ``spec`` with the atom factor.

    ``actual`` (dressed states of a jittered drive) replaces the atom's
    splitting and mixing angle; the frame stays on the nominal sidebands.
    """
    p = config.step_params(step)
    if actual is not None:
        return JitterCoupling(config.g, spec, config.basis, config.r)(p.d, actual)
    if config.basis == "b":
        return bogoliubov_jc_hamiltonian(p, spec, free=False)
    a1, a2 = physical_mode_ops(spec, "a")
    h0 = p.d * (atom_op(PI_Z, spec) / 2 - a1.T @ a1 + a2.T @ a2)
    return effective_hamiltonian(p, config.g, spec) - h0


class _Kicks:
    """Kick channels of both steps, shared by all trajectories of one config."""

    def __init__(self, config: ProtocolConfig, field_spec: HilbertSpec):
        self.config = config
        self.field_spec = field_spec
        self.spec = field_spec.with_atom()
        res = config.resolved_reservoir()
        if res.tau is None:
            raise ValueError("the stochastic engine needs the interaction time tau")
        self.res = res
        self._jitter = None
        self.channels = {
            step: KickChannel.from_hamiltonian(
                interaction_hamiltonian(config, step, self.spec), res.tau, "+" if step == 1 else "-", field_spec
            )
            for step in (1, 2)
        }

    def jittered(self, step, omega):
        cfg = self.config
        if self._jitter is None:
            self._jitter = JitterCoupling(cfg.g, self.spec, cfg.basis, cfg.r)
        sign = 1 if step == 1 else -1
        actual = dressed_states(sign * abs(cfg.drive.Delta), omega)
        h = self._jitter(cfg.step_params(step).d, actual)
        # one exponential per atom; the self-check already ran on the nominal channels
        return KickChannel.from_hamiltonian(h, self.res.tau, "+" if step == 1 else "-", self.field_spec, check=False)


def _streams(seed, traj):
    """Per-trajectory generators: arrivals of step 1, step 2 and the jitter draws."""
    ss = np.random.SeedSequence(seed, spawn_key=(int(traj),))
    return [np.random.default_rng(s) for s in ss.spawn(3)]


def _arrivals(r_at, T, rng):
    return poisson_arrivals(r_at, T, rng) if T > 0 else np.zeros(0)


def stochastic_trajectory(config: ProtocolConfig, traj: int = 0, *, record_every_kick=True, _kicks=None):
    """One realization of the protocol with Poisson-distributed atoms.

    Observables are recorded after every kick (and at the start and the
    step boundary). Trajectory ``traj`` draws from
    ``SeedSequence(config.seed, spawn_key=(traj,))``.
    """
    state0 = initial_state(config)
    T1, T2 = _durations(config, state0)
    state = _dense(state0)
    kicks = _kicks or _Kicks(config, state.spec)
    res = kicks.res
    rng1, rng2, rng_j = _streams(config.seed, traj)
    rec = _Recorder(config.r, config.gamma)
    rec(0.0, 1, state)
    counts = []
    t0 = 0.0
    for step, T, rng in ((1, T1, rng1), (2, T2, rng2)):
        times = _arrivals(res.r_at, T, rng)
        chan = kicks.channels[step]
        for t in times:
            if res.jitter_std > 0:
                chan = kicks.jittered(step, _draw_omega(config.Omega, res.jitter_std, rng_j))
            state = state.replace(chan.apply(state.data))
            if record_every_kick:
                rec(t0 + t, step, state)
        counts.append(len(times))
        if T > 0:
            rec(t0 + T, step, state)
        t0 += T
    return _finish(config, state, rec, T1, T2, tuple(counts))


def _draw_omega(omega, std, rng):
    while True:
        w = rng.normal(omega, std)
        if w > 0:
            return w


@dataclass
class EnsembleResult:
    """Mean and standard error of observables over trajectories at fixed checkpoints."""

    times: np.ndarray
    mean: dict
    sem: dict
    n_trajectories: int
    T1: float
    T2: float
    gamma: float
    final_states: list = field(default_factory=list, repr=False)

    def mean_state(self):
        return sum(s.data for s in self.final_states) / len(self.final_states)


ENSEMBLE_COLUMNS = ("n_b1", "n_b2", "fidelity")


def _observe(state, r):
    mb = stored_moments(state)
    return (mb.n1, mb.n2, vacuum_fidelity(state))


def stochastic_ensemble(config: ProtocolConfig, n_trajectories, checkpoints=None, *, keep_states=False):
    """Ensemble average of ``n_trajectories`` seeded trajectories.

    ``checkpoints`` are absolute times (default: 10 points evenly over
    ``[0, 2T]``). Without jitter every kick applies the same channel, so
    a trajectory's state depends only on how many atoms of each step have
    arrived; those states are computed once and shared, which gives the
    same numbers as running :func:`stochastic_trajectory` independently.
    With jitter each trajectory is propagated on its own.
    """
    state0 = _dense(initial_state(config))
    T1, T2 = _durations(config, state0)
    if checkpoints is None:
        checkpoints = np.linspace(0.0, T1 + T2, 10)
    checkpoints = np.asarray(checkpoints, dtype=float)
    kicks = _Kicks(config, state0.spec)
    res = kicks.res
    r = config.r

    arrivals = []
    for j in range(n_trajectories):
        rng1, rng2, _ = _streams(config.seed, j)
        arrivals.append((_arrivals(res.r_at, T1, rng1), T1 + _arrivals(res.r_at, T2, rng2)))

    values = np.zeros((n_trajectories, len(checkpoints), len(ENSEMBLE_COLUMNS)))
    finals = []
    if res.jitter_std > 0:
        for j, (a1, a2) in enumerate(arrivals):
            _, _, rng_j = _streams(config.seed, j)
            state = state0
            events = [(t, 1) for t in a1] + [(t, 2) for t in a2]
            e = 0
            for c, tc in enumerate(checkpoints):
                while e < len(events) and events[e][0] < tc:
                    step = events[e][1]
                    chan = kicks.jittered(step, _draw_omega(config.Omega, res.jitter_std, rng_j))
                    state = state.replace(chan.apply(state.data))
                    e += 1
                values[j, c] = _observe(state, r)
            for t, step in events[e:]:
                chan = kicks.jittered(step, _draw_omega(config.Omega, res.jitter_std, rng_j))
                state = state.replace(chan.apply(state.data))
            finals.append(state)
    else:
        n1 = np.array([[np.searchsorted(a1, tc, side="left") for tc in checkpoints] for a1, _ in arrivals])
        n2 = np.array([[np.searchsorted(a2, tc, side="left") for tc in checkpoints] for _, a2 in arrivals])
        tot1 = np.array([len(a1) for a1, _ in arrivals])
        tot2 = np.array([len(a2) for _, a2 in arrivals])
        need1 = set(np.unique(n1[n2 == 0]).tolist()) | set(tot1.tolist())
        chain1 = _chain(state0, kicks.channels[1], max(need1), need1)
        obs_cache = {}
        for j in range(n_trajectories):
            for c in range(len(checkpoints)):
                if n2[j, c] == 0:
                    key = (n1[j, c], 0)
                    if key not in obs_cache:
                        obs_cache[key] = _observe(chain1[n1[j, c]], r)
                    values[j, c] = obs_cache[key]
        for k1 in np.unique(tot1):
            members = np.nonzero(tot1 == k1)[0]
            need2 = set(np.unique(n2[members]).tolist()) | set(tot2[members].tolist())
            chain2 = _chain(chain1[k1], kicks.channels[2], max(need2), need2)
            for j in members:
                for c in range(len(checkpoints)):
                    if n2[j, c] > 0:
                        key = (k1, n2[j, c])
                        if key not in obs_cache:
                            obs_cache[key] = _observe(chain2[n2[j, c]], r)
                        values[j, c] = obs_cache[key]
                if keep_states:
                    finals.append((j, chain2[tot2[j]]))
        finals = [s for _, s in sorted(finals, key=lambda x: x[0])]
    mean = {c: values[:, :, i].mean(axis=0) for i, c in enumerate(ENSEMBLE_COLUMNS)}
    ddof = 1 if n_trajectories > 1 else 0
    sem = {c: values[:, :, i].std(axis=0, ddof=ddof) / math.sqrt(n_trajectories) for i, c in enumerate(ENSEMBLE_COLUMNS)}
    return EnsembleResult(
        checkpoints, mean, sem, n_trajectories, T1, T2, config.gamma, finals if keep_states else []
    )


def _chain(state, channel, n, keep):
    """``{m: channel^m(state)}`` for ``m`` in ``keep`` (m <= n)."""
    out = {}
    if 0 in keep:
        out[0] = state
    for m in range(1, n + 1):
        state = state.replace(channel.apply(state.data))
        if m in keep:
            out[m] = state
    return out


# --- entry point -------------------------------------------------------------------------


def run_protocol(config: ProtocolConfig) -> ProtocolResult:
    """Run both protocol steps with the configured engine and basis."""
    state = initial_state(config)
    if config.basis == "a":
        n_req = recommended_cutoff(n_bar_initial(config.mu, config.n_th if config.initial == "thermal" else 0.0))
        if state.spec.n_max1 < 0.5 * n_req:
            warnings.warn(
                RegimeWarning(f"a-basis cutoff {state.spec.n_max1} is far below the {n_req} levels mu={config.mu} needs"),
                stacklevel=2,
            )
    if config.engine == "master-equation":
        return _me_run(config, state if config.basis == "b" else _dense(state))
    return stochastic_trajectory(config)
