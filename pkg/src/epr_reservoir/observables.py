"""Occupations, EPR variance, fidelity and log-negativity.

Functions accept dense :class:`~epr_reservoir.fock.QuantumState` objects and
:class:`~epr_reservoir.sectors.SectorState` objects alike.

Quadratures are ``X = (a + a^dag)/sqrt(2)``, ``P = (a - a^dag)/(i sqrt(2))``,
so vacuum noise is 1/2 per quadrature and the EPR variance
``Var(X1 - X2) + Var(P1 + P2)`` equals 2 for the vacuum pair and
``2 exp(-2r)`` for ``S(r)^dag|0,0>``.

Second moments of the physical modes are obtained from the stored basis
through the exact Bogoliubov relations (``a1 = c b1 + s b2^dag``,
``a2 = c b2 + s b1^dag``, ``c = cosh r``, ``s = sinh r``), so b-basis states
never need a truncated change of basis to report a-basis moments.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .fock import LEAKAGE_THRESHOLD, QuantumState, basis_transform, mode_ops, top_level_population
from .sectors import SectorState


@dataclass(frozen=True)
class Moments:
    """First and second moments of the two modes in one basis."""

    m1: complex  # <m1>
    m2: complex  # <m2>
    n1: float  # <m1^dag m1>
    n2: float
    pair: complex  # <m1 m2>

    def bogoliubov(self, r: float) -> Moments:
        """Moments of ``S^dag m S``-type modes: ``m1' = c m1 + s m2^dag``, ``m2' = c m2 + s m1^dag``."""
        c, s = math.cosh(r), math.sinh(r)
        return Moments(
            m1=c * self.m1 + s * np.conj(self.m2),
            m2=c * self.m2 + s * np.conj(self.m1),
            n1=c * c * self.n1 + 2 * c * s * self.pair.real + s * s * (self.n2 + 1),
            n2=c * c * self.n2 + 2 * c * s * self.pair.real + s * s * (self.n1 + 1),
            pair=c * c * self.pair + s * s * np.conj(self.pair) + c * s * (self.n1 + self.n2 + 1),
        )


def _field_rho(state: QuantumState) -> np.ndarray:
    rho = state.density_matrix()
    spec = state.spec
    if spec.include_atom:
        d = spec.field_dim
        rho = rho.reshape(d, 2, d, 2).trace(axis1=1, axis2=3)
    return rho


@functools.lru_cache(maxsize=32)
def _ops(n_max1, n_max2):
    from .fock import HilbertSpec

    a1, a2 = mode_ops(HilbertSpec(n_max1, n_max2))
    return a1, a2, a1 @ a2


def stored_moments(state) -> Moments:
    """Moments of the ladder operators of the basis ``state`` is stored in."""
    if isinstance(state, SectorState):
        return Moments(0j, 0j, state.mean_number(1), state.mean_number(2), state.pair_moment())
    spec = state.spec
    if state.is_pure and not spec.include_atom:
        return _pure_moments(state.data.reshape(spec.n_max1 + 1, spec.n_max2 + 1))
    rho = _field_rho(state)
    a1, a2, a12 = _ops(spec.n_max1, spec.n_max2)
    p = np.real(np.diag(rho)).reshape(spec.n_max1 + 1, spec.n_max2 + 1)
    return Moments(
        m1=complex(np.sum(rho.T * a1)),
        m2=complex(np.sum(rho.T * a2)),
        n1=float(np.arange(spec.n_max1 + 1) @ p.sum(axis=1)),
        n2=float(np.arange(spec.n_max2 + 1) @ p.sum(axis=0)),
        pair=complex(np.sum(rho.T * a12)),
    )


def _pure_moments(psi) -> Moments:
    s1 = np.sqrt(np.arange(1, psi.shape[0]))[:, None]
    s2 = np.sqrt(np.arange(1, psi.shape[1]))[None, :]
    a1psi = s1 * psi[1:, :]  # (a1 psi)[n1, n2] = sqrt(n1 + 1) psi[n1 + 1, n2]
    a2psi = s2 * psi[:, 1:]
    a12psi = s1 * s2 * psi[1:, 1:]
    p = np.abs(psi) ** 2
    return Moments(
        m1=complex(np.vdot(psi[:-1, :], a1psi)),
        m2=complex(np.vdot(psi[:, :-1], a2psi)),
        n1=float(np.arange(psi.shape[0]) @ p.sum(axis=1)),
        n2=float(np.arange(psi.shape[1]) @ p.sum(axis=0)),
        pair=complex(np.vdot(psi[:-1, :-1], a12psi)),
    )


def moments(state, basis: str, r: float | None = None) -> Moments:
    """Moments of the a- or b-mode operators.

    ``r`` is needed when ``basis`` differs from the state's own basis and
    the state is in the a basis (b-basis states carry their own ``r``).
    """
    m = stored_moments(state)
    if basis == state.basis:
        if basis == "b" and r is not None and not math.isclose(r, state.r, abs_tol=1e-12):
            raise ValueError(f"state is stored in the b basis of r={state.r}, not r={r}")
        return m
    if basis == "a":  # b -> a
        return m.bogoliubov(state.r)
    if r is None:
        raise ValueError("a-basis state: supply r to get b-basis moments")
    return m.bogoliubov(-r)


def mean_photon(state, mode: int, basis: str | None = None, r: float | None = None) -> float:
    """``<n_mode>`` in the requested basis (defaults to the state's own basis)."""
    if mode not in (1, 2):
        raise ValueError("mode must be 1 or 2")
    m = moments(state, basis or state.basis, r)
    return float(m.n1 if mode == 1 else m.n2)


def epr_variance_from_moments(m: Moments) -> float:
    return float(
        2.0
        + 2.0 * (m.n1 + m.n2)
        - 4.0 * m.pair.real
        - 2.0 * (m.m1 - m.m2).real ** 2
        - 2.0 * (m.m1 + m.m2).imag ** 2
    )


def epr_variance(state) -> float:
    """``Var(X1 - X2) + Var(P1 + P2)`` of the physical modes; below 2 certifies entanglement."""
    _check_convention()
    return epr_variance_from_moments(moments(state, "a"))


def _epr_by_operators(state: QuantumState) -> float:
    # direct operator route, used for the convention self-test
    spec = state.spec
    a1, a2, _ = _ops(spec.n_max1, spec.n_max2)
    rho = _field_rho(state)
    x = (a1 + a1.T - a2 - a2.T) / math.sqrt(2)
    p = (a1 - a1.T + a2 - a2.T) / (1j * math.sqrt(2))
    total = 0.0
    for q in (x, p):
        mean = np.trace(rho @ q).real
        total += np.trace(rho @ q @ q).real - mean**2
    return float(total)


@functools.lru_cache(maxsize=1)
def _check_convention():
    """Assert that the chosen quadrature combination detects the TMSV of this phase convention."""
    from .fock import HilbertSpec, tmsv_state

    r = 0.5
    st = tmsv_state(r, HilbertSpec(30, 30))
    want = 2 * math.exp(-2 * r)
    via_moments = epr_variance_from_moments(stored_moments(st))
    via_ops = _epr_by_operators(st)
    if not (abs(via_moments - want) < 1e-8 and abs(via_ops - want) < 1e-6):
        raise AssertionError(
            f"quadrature convention self-test failed: {via_moments}, {via_ops} vs 2exp(-2r) = {want}"
        )
    return True


def fidelity(state, target) -> float:
    """``<psi| rho |psi>`` for a pure ``target`` in the same basis."""
    if state.basis != target.basis:
        raise ValueError(f"basis mismatch: state in {state.basis}, target in {target.basis}")
    if state.basis == "b" and not math.isclose(state.r, target.r, abs_tol=1e-12):
        raise ValueError("b-basis states with different squeeze parameters")
    if not target.is_pure:
        raise ValueError("target must be a pure state")
    psi = target.data
    if isinstance(state, SectorState):
        return state.overlap(psi)
    if state.spec != target.spec:
        raise ValueError("state and target live on different spaces")
    if state.is_pure:
        return float(abs(np.vdot(psi, state.data)) ** 2)
    return float(np.real(np.vdot(psi, state.data @ psi)))


def vacuum_fidelity(state) -> float:
    """Overlap with ``|0,0>`` of the state's own basis."""
    if isinstance(state, SectorState):
        return float(state.stack[state.K, 0, 0].real)
    rho = _field_rho(state)
    return float(rho[0, 0].real)


def joint_photon_distribution(state) -> np.ndarray:
    """``P(n1, n2)`` in the state's basis."""
    if isinstance(state, SectorState):
        p = state.joint_distribution()
    else:
        rho = _field_rho(state)
        spec = state.spec
        p = np.real(np.diag(rho)).reshape(spec.n_max1 + 1, spec.n_max2 + 1)
    return np.clip(p, 0.0, None)


def off_diagonal_mass(state) -> float:
    p = joint_photon_distribution(state)
    return float(p.sum() - np.trace(p))


def log_negativity(state, *, threshold=LEAKAGE_THRESHOLD) -> float:
    """Base-2 logarithmic negativity between the two physical modes.

    Uses the partial transpose on mode 2 of the full truncated density
    matrix. b-basis states are first transformed to the a basis. The result
    is NaN-free but meaningless if truncation leaks; a
    :class:`~epr_reservoir.errors.TruncationWarning` is emitted in that case.
    """
    if state.basis == "b":
        state = basis_transform(state, state.r, "b->a", threshold=threshold)
    if isinstance(state, SectorState):
        norm = sum(np.abs(np.linalg.eigvalsh(b)).sum() for b in state.partial_transpose_blocks())
    else:
        spec = state.spec
        d1, d2 = spec.n_max1 + 1, spec.n_max2 + 1
        rho = _field_rho(state).reshape(d1, d2, d1, d2).transpose(0, 3, 2, 1).reshape(d1 * d2, d1 * d2)
        norm = np.abs(np.linalg.eigvalsh(rho)).sum()
    return float(math.log2(norm))


def trace_distance(rho, sigma) -> float:
    """``||rho - sigma||_1 / 2``. Both arguments must share basis and cutoffs."""
    if rho.basis != sigma.basis:
        raise ValueError("basis mismatch")
    if isinstance(rho, SectorState) and isinstance(sigma, SectorState):
        if (rho.n_max1, rho.n_max2) != (sigma.n_max1, sigma.n_max2):
            raise ValueError("cutoff mismatch")
        diff = SectorState(rho.stack - sigma.stack, rho.n_max1, rho.n_max2, rho.basis, rho.r)
        return float(0.5 * np.abs(diff.charge_eigenvalues()).sum())
    if isinstance(rho, SectorState):
        rho = rho.to_dense()
    if isinstance(sigma, SectorState):
        sigma = sigma.to_dense()
    diff = _field_rho(rho) - _field_rho(sigma)
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


@dataclass(frozen=True)
class MetricsReport:
    mean_n_a1: float
    mean_n_a2: float
    mean_n_b1: float
    mean_n_b2: float
    epr_variance: float
    fidelity: float
    log_negativity: float | None
    leakage: float

    def as_dict(self):
        return dict(self.__dict__)


def metrics_report(state, r: float, *, with_log_negativity=True) -> MetricsReport:
    """All state-quality metrics; fidelity is to ``|0,0>_b`` for squeeze ``r``."""
    ma = moments(state, "a")
    mb = moments(state, "b", r)
    if state.basis == "b":
        fid = vacuum_fidelity(state)
    else:
        from .fock import tmsv_state

        fid = fidelity(state, tmsv_state(r, state.spec.field_only()))
    return MetricsReport(
        mean_n_a1=float(ma.n1),
        mean_n_a2=float(ma.n2),
        mean_n_b1=float(mb.n1),
        mean_n_b2=float(mb.n2),
        epr_variance=epr_variance_from_moments(ma),
        fidelity=fid,
        log_negativity=log_negativity(state) if with_log_negativity else None,
        leakage=top_level_population(state),
    )
