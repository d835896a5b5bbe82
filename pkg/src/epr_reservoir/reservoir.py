"""Atomic-beam reservoir: single-atom kicks, Poisson arrivals and the damping master equation.

The master equation for damping of one Bogoliubov mode ``b`` at rate
``gamma`` is

    d rho / dt = -(gamma/2) (b^dag b rho - 2 b rho b^dag + rho b^dag b).

It maps ``<n, m|`` elements with a fixed offset ``n - m`` only among
themselves, so on every offset diagonal it is a small upper-bidiagonal
linear system. :func:`lindblad_evolve` exponentiates those blocks exactly
("exact" method) or integrates the full equation with an adaptive
Runge-Kutta scheme ("adaptive" method, for a-basis states and
cross-checks).
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .errors import NumericalError, RegimeWarning
from .fock import HilbertSpec, QuantumState, annihilation_op, expm, mode_ops
from .sectors import SectorState


@dataclass(frozen=True)
class ReservoirParams:
    """Atomic beam: arrival rate, interaction time, damping rate and drive jitter.

    Give either ``gamma`` (optionally with ``tau``) or ``r_at`` with
    ``tau``; ``gamma = r_at Omega_b^2 tau^2`` links the two once the
    effective coupling is known (:meth:`with_coupling`).
    """

    r_at: float | None = None
    tau: float | None = None
    gamma: float | None = None
    jitter_std: float = 0.0
    Omega_b: float | None = None

    def __post_init__(self):
        for name in ("r_at", "tau", "gamma", "Omega_b"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")
        if self.jitter_std < 0:
            raise ValueError("jitter_std must be non-negative")
        if self.gamma is None and (self.r_at is None or self.tau is None):
            raise ValueError("give gamma, or both r_at and tau")
        if self.r_at is not None and self.tau is not None and self.Omega_b is not None:
            derived = self.r_at * (self.Omega_b * self.tau) ** 2
            if self.gamma is not None and not math.isclose(self.gamma, derived, rel_tol=1e-9):
                raise ValueError(f"gamma={self.gamma} disagrees with r_at Omega_b^2 tau^2 = {derived}")
            object.__setattr__(self, "gamma", derived)
        elif self.r_at is not None and self.gamma is not None and self.Omega_b is None:
            raise ValueError("gamma and r_at are alternative ways to set the rate; give only one")
        if self.tau is not None and self.Omega_b is not None:
            if self.Omega_b * self.tau > 0.2:
                warnings.warn(RegimeWarning(f"Omega_b tau = {self.Omega_b * self.tau:.3g} > 0.2"), stacklevel=3)
            if self.r_at is not None and self.r_at * self.tau > 0.1:
                warnings.warn(
                    RegimeWarning(f"r_at tau = {self.r_at * self.tau:.3g} > 0.1: atoms overlap"), stacklevel=3
                )

    def with_coupling(self, Omega_b) -> ReservoirParams:
        """Fill in the missing member of (gamma, r_at) from ``Omega_b``."""
        if self.r_at is None and self.tau is not None:
            r_at = self.gamma / (Omega_b * self.tau) ** 2
            return replace(self, r_at=r_at, Omega_b=Omega_b)
        if self.r_at is not None and self.gamma is not None and self.Omega_b is not None:
            if not math.isclose(Omega_b, self.Omega_b, rel_tol=1e-12):
                return replace(self, gamma=None, Omega_b=Omega_b)
            return self
        return replace(self, Omega_b=Omega_b)

    @property
    def kick_angle(self) -> float:
        """``Omega_b tau``."""
        if self.Omega_b is None or self.tau is None:
            raise ValueError("kick angle needs Omega_b and tau")
        return self.Omega_b * self.tau


# --- kicks -----------------------------------------------------------------------


class KickChannel:
    """One atom transit as a Kraus channel on the field.

    ``kraus[j] = <j| U |psi_atom>`` with ``U = expm(-i H tau)``, stored
    sparse. Built from a Hamiltonian on ``field (x) atom``.
    """

    def __init__(self, kraus, field_spec: HilbertSpec):
        self.kraus = [sp.csr_matrix(k) for k in kraus]
        self.field_spec = field_spec
        self._dagger = [k.conj().T.tocsr() for k in self.kraus]
        self._super = None

    @property
    def superoperator(self):
        """``sum_j K_j (x) conj(K_j)``, acting on row-major ``vec(rho)``."""
        if self._super is None:
            self._super = sum(sp.kron(k, k.conj(), format="csr") for k in self.kraus).tocsr()
        return self._super

    @classmethod
    def from_hamiltonian(cls, H, tau, atom_state, field_spec: HilbertSpec, drop=1e-16, check=True):
        psi = _atom_vector(atom_state)
        D = field_spec.dim
        if H.shape != (2 * D, 2 * D):
            raise ValueError(f"Hamiltonian of shape {H.shape} does not act on field dim {D} times atom")
        u = expm(-1j * np.asarray(H) * tau, check=check).reshape(D, 2, D, 2)
        kraus = []
        for j in range(2):
            k = np.tensordot(u[:, j, :, :], psi, axes=([2], [0]))
            k[np.abs(k) < drop] = 0.0
            kraus.append(k)
        return cls(kraus, field_spec)

    def completeness_error(self) -> float:
        total = sum((kd @ k).toarray() for k, kd in zip(self.kraus, self._dagger))
        return float(np.abs(total - np.eye(self.field_spec.dim)).max())

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """``sum_j K_j rho K_j^dag``."""
        rho = np.asarray(rho)
        D = self.field_spec.dim
        if sum(k.nnz for k in self.kraus) > 4 * D:
            # nearly dense Kraus operators: the superoperator would have ~D^4 entries
            return sum(k @ (k @ rho.conj().T).conj().T for k in self.kraus)
        return (self.superoperator @ rho.ravel()).reshape(rho.shape)


def _atom_vector(atom_state):
    if isinstance(atom_state, str):
        if atom_state not in ("+", "-"):
            raise ValueError("atom_state must be '+', '-' or a 2-vector")
        return np.array([1.0, 0.0]) if atom_state == "+" else np.array([0.0, 1.0])
    v = np.asarray(atom_state, dtype=complex)
    if v.shape != (2,) or not math.isclose(np.linalg.norm(v), 1.0, rel_tol=1e-10):
        raise ValueError("atom state must be a normalized 2-vector")
    return v


def kick_map(rho: QuantumState, atom_state, H, tau) -> QuantumState:
    """``Tr_atom[U (rho x |atom><atom|) U^dag]`` with ``U = expm(-i H tau)``."""
    if rho.spec.include_atom:
        raise ValueError("kick_map takes a field-only state")
    channel = KickChannel.from_hamiltonian(H, tau, atom_state, rho.spec)
    return rho.replace(channel.apply(rho.density_matrix()))


def poisson_arrivals(r_at, T_total, seed) -> np.ndarray:
    """Sorted arrival times of a Poisson beam of rate ``r_at`` on ``[0, T_total)``.

    ``seed`` is an int, a :class:`numpy.random.SeedSequence` or a Generator.
    Gaps are drawn in chunks from ``Exp(r_at)``.
    """
    if not r_at > 0 or not T_total > 0:
        raise ValueError("r_at and T_total must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    expected = r_at * T_total
    chunk = int(expected + 5 * math.sqrt(expected) + 10)
    times = []
    t = 0.0
    while True:
        gaps = rng.exponential(1.0 / r_at, size=chunk)
        arr = t + np.cumsum(gaps)
        if arr[-1] >= T_total:
            times.append(arr[arr < T_total])
            break
        times.append(arr)
        t = arr[-1]
    return np.concatenate(times)


# --- damping master equation ---------------------------------------------------------


def damping_generator(k, size) -> np.ndarray:
    """Generator on the offset-``k`` diagonal ``x_i = rho[n_i, n_i - k]``, ``n_i = i + max(k, 0)``."""
    lo = max(k, 0)
    n = np.arange(size) + lo
    m = n - k
    g = np.diag(-(n + m) / 2.0)
    up = np.sqrt((n[:-1] + 1) * (m[:-1] + 1))
    g[np.arange(size - 1), np.arange(1, size)] = up
    return g


@functools.lru_cache(maxsize=6)
def _propagator_set(n_max, k_max, gt):
    # real generators, so real propagators; a few sets at most (one per time step in use)
    return {k: expm(damping_generator(k, n_max + 1 - abs(k)) * gt) for k in range(-k_max, k_max + 1)}


def damping_propagators(n_max, gt, k_max=None) -> dict[int, np.ndarray]:
    """``{k: expm(gamma t G_k)}`` for one mode with cutoff ``n_max``."""
    k_max = n_max if k_max is None else k_max
    return _propagator_set(int(n_max), int(k_max), float(gt))


def pure_loss_element(rho_fn, n, m, eta, n_max):
    """Closed-form pure-loss solution ``sum_l sqrt(C(n+l,l) C(m+l,l)) eta^{(n+m)/2} (1-eta)^l rho_{n+l,m+l}``."""
    total = 0.0
    for l in range(0, n_max + 1 - max(n, m)):
        w = math.sqrt(math.comb(n + l, l) * math.comb(m + l, l)) * eta ** ((n + m) / 2) * (1 - eta) ** l
        total += w * rho_fn(n + l, m + l)
    return total


def _dense_apply(rho, spec: HilbertSpec, mode, gt):
    d1, d2 = spec.n_max1 + 1, spec.n_max2 + 1
    t = np.array(rho.reshape(d1, d2, d1, d2))
    if mode == 2:
        t = t.transpose(1, 0, 3, 2)
    n_max = t.shape[0] - 1
    out = np.zeros_like(t)
    for k, prop in damping_propagators(n_max, gt).items():
        n = np.arange(max(k, 0), n_max + 1 + min(k, 0))
        blk = t[n, :, n - k, :]  # (len, spectator, spectator)
        out[n, :, n - k, :] = np.tensordot(prop, blk, axes=([1], [0]))
    if mode == 2:
        out = out.transpose(1, 0, 3, 2)
    return out.reshape(rho.shape)


def _lindblad_rhs(b, gamma):
    bd = b.conj().T.tocsr()
    nb = (bd @ b).tocsr()
    D = b.shape[0]

    def rhs(_t, y):
        rho = y.reshape(D, D)
        brb = b @ (bd.T @ rho.T).T
        return (gamma * (brb - 0.5 * (nb @ rho + (nb.T @ rho.T).T))).ravel()

    return rhs


def _adaptive(state: QuantumState, gamma, mode, t, r, rtol, atol):
    spec = state.spec
    if state.basis == "a":
        if r is None:
            raise ValueError("a-basis state: give r to define the Bogoliubov mode")
        a1, a2 = mode_ops(spec)
        c, s = math.cosh(r), math.sinh(r)
        b = c * a1 - s * a2.T if mode == 1 else c * a2 - s * a1.T
    else:
        b = mode_ops(spec)[mode - 1]
    b = sp.csr_matrix(b)
    rho0 = state.density_matrix()
    sol = solve_ivp(
        _lindblad_rhs(b, gamma), (0.0, t), rho0.ravel(), method="DOP853", rtol=rtol, atol=atol, t_eval=[t]
    )
    if not sol.success:
        raise NumericalError(f"master-equation integration failed: {sol.message}")
    return sol.y[:, -1].reshape(rho0.shape)


def lindblad_evolve(rho0, gamma, mode, t, *, method="exact", r=None, rtol=1e-11, atol=1e-14):
    """Evolve under damping of Bogoliubov mode ``mode`` (1 or 2) for time ``t``.

    ``rho0`` is a b-basis :class:`QuantumState` or :class:`SectorState`.
    ``method="adaptive"`` integrates with local error control instead and
    also accepts a-basis states (then ``r`` defines the b modes).
    """
    if mode not in (1, 2):
        raise ValueError("mode must be 1 or 2")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return rho0
    gt = gamma * t
    if isinstance(rho0, SectorState):
        if rho0.basis != "b" and method == "exact":
            raise ValueError("the exact propagator acts on b-basis states")
        n_max = rho0.n_max1 if mode == 1 else rho0.n_max2
        return rho0.apply_offset_maps(mode, damping_propagators(n_max, gt, rho0.K))
    if rho0.spec.include_atom:
        raise ValueError("field-only state expected")
    if method == "exact":
        if rho0.basis != "b":
            raise ValueError("the exact propagator acts on b-basis states; use method='adaptive'")
        data = _dense_apply(rho0.density_matrix(), rho0.spec, mode, gt)
    elif method == "adaptive":
        data = _adaptive(rho0, gamma, mode, t, r, rtol, atol)
    else:
        raise ValueError(f"unknown method {method!r}")
    return rho0.replace(data)


def lindblad_trajectory(rho0, gamma, mode, times, **kw):
    """States at each of the increasing ``times`` (starting from ``rho0`` at 0)."""
    out = []
    state, last = rho0, 0.0
    for t in times:
        if t < last:
            raise ValueError("times must be non-decreasing")
        state = lindblad_evolve(state, gamma, mode, t - last, **kw)
        out.append(state)
        last = t
    return out


def single_mode_kraus(n_max, angle, atom_state, mode_role):
    """Closed-form Jaynes-Cummings Kraus pair for one b mode.

    ``mode_role="absorb"``: atom in the upper coupled level absorbs a
    photon (``-(b pi- + b^dag pi+)`` coupling with the atom in ``|+>``).
    Returns ``(K_stay, K_jump)`` as dense ``(n_max+1)``-square matrices.
    Used as an oracle for the generic :class:`KickChannel`.
    """
    n = np.arange(n_max + 1)
    b = annihilation_op(n_max)
    if mode_role != "absorb":
        raise ValueError("only the absorbing role is implemented")
    k0 = np.diag(np.cos(angle * np.sqrt(n)))
    root = np.sqrt(np.maximum(n, 1))
    k1 = 1j * b @ np.diag(np.where(n > 0, np.sin(angle * np.sqrt(n)) / root, 0.0))
    return k0, k1
