"""Hamiltonians of the driven atom coupled to two cavity modes.

The atomic factor uses the bare basis ``(|g>, |e>)`` for the lab and
rotating-frame Hamiltonians and the dressed basis ``(|+>, |->)`` for
everything built on the dressed states. hbar = 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dressed import DressedParams, DressedStates
from .errors import RegimeError, RegimeWarning
from .fock import HilbertSpec, embed, expm, mode_ops, tmsv_state

# dressed atom: index 0 = |+>, 1 = |->
PI_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]])
PI_MINUS = PI_PLUS.T
PI_Z = np.diag([1.0, -1.0])
# bare atom: index 0 = |g>, 1 = |e>
SIGMA = np.array([[0.0, 1.0], [0.0, 0.0]])  # |g><e|
SIGMA_DAG = SIGMA.T

TERM_GROUPS = ("displacement", "co", "counter")

ATOM_PLUS = np.array([1.0, 0.0])
ATOM_MINUS = np.array([0.0, 1.0])


def _need_atom(spec: HilbertSpec):
    if not spec.include_atom:
        raise ValueError("this Hamiltonian needs a HilbertSpec with include_atom=True")


def atom_op(op, spec: HilbertSpec) -> np.ndarray:
    return embed(op, 2, spec)


def physical_mode_ops(spec: HilbertSpec, basis="a", r=None):
    """Physical ladder operators ``a1, a2`` as matrices in the chosen basis.

    In the b basis they are ``a1 = c b1 + s b2^dag`` and
    ``a2 = c b2 + s b1^dag`` with ``c = cosh r``, ``s = sinh r``.
    """
    m1, m2 = mode_ops(spec)
    if basis == "a":
        return m1, m2
    if basis != "b" or r is None:
        raise ValueError("b basis needs the squeeze parameter r")
    c, s = math.cosh(r), math.sinh(r)
    return c * m1 + s * m2.T, c * m2 + s * m1.T


def _couplings(g):
    if np.ndim(g) == 0:
        return float(g), float(g)
    g1, g2 = g
    return float(g1), float(g2)


def lab_hamiltonian(omega0, omegaL, Omega, omega1, omega2, g, spec: HilbertSpec):
    """Lab-frame Hamiltonian as a function of time (bare atomic basis).

    ``H(t) = w0 s^dag s + Omega (e^{-i wL t} s^dag + h.c.)
    + sum_l [w_l a_l^dag a_l + g_l (a_l s^dag + a_l^dag s)]``.
    """
    _need_atom(spec)
    g1, g2 = _couplings(g)
    a1, a2 = mode_ops(spec)
    sd, sm = atom_op(SIGMA_DAG, spec), atom_op(SIGMA, spec)
    static = omega0 * sd @ sm
    for w, gl, a in ((omega1, g1, a1), (omega2, g2, a2)):
        static = static + w * a.T @ a + gl * (a @ sd + a.T @ sm)

    def hamiltonian(t):
        phase = np.exp(-1j * omegaL * t)
        return static + Omega * (phase * sd + np.conj(phase) * sm)

    return hamiltonian


def rotating_frame_unitary(t, omegaL, spec: HilbertSpec) -> np.ndarray:
    """``exp[i wL t (s^dag s + n1 + n2)]``: takes the lab frame to the drive frame."""
    _need_atom(spec)
    a1, a2 = mode_ops(spec)
    excitations = np.real(np.diag(atom_op(SIGMA_DAG @ SIGMA, spec) + a1.T @ a1 + a2.T @ a2))
    return np.diag(np.exp(1j * omegaL * t * excitations))


def rotating_frame_hamiltonian(Delta, Omega, delta1, delta2, g, spec: HilbertSpec) -> np.ndarray:
    """Drive-frame Hamiltonian in the bare atomic basis.

    ``-Delta s^dag s + Omega (s^dag + s) - sum_l delta_l n_l + sum_l g_l (s^dag a_l + s a_l^dag)``.
    """
    _need_atom(spec)
    g1, g2 = _couplings(g)
    a1, a2 = mode_ops(spec)
    sd, sm = atom_op(SIGMA_DAG, spec), atom_op(SIGMA, spec)
    h = -Delta * sd @ sm + Omega * (sd + sm)
    for dl, gl, a in ((delta1, g1, a1), (delta2, g2, a2)):
        h = h - dl * a.T @ a + gl * (sd @ a + sm @ a.T)
    return h


def dressed_free_hamiltonian(d, delta1, delta2, spec: HilbertSpec, ops=None) -> np.ndarray:
    """``d pi_z / 2 - delta1 n1 - delta2 n2``."""
    a1, a2 = ops if ops is not None else mode_ops(spec)
    return d / 2 * atom_op(PI_Z, spec) - delta1 * a1.conj().T @ a1 - delta2 * a2.conj().T @ a2


def _term(group, a, theta, spec):
    c, s = math.cos(theta), math.sin(theta)
    pp, pm, pz = atom_op(PI_PLUS, spec), atom_op(PI_MINUS, spec), atom_op(PI_Z, spec)
    ad = a.conj().T
    if group == "displacement":
        return c * s * pz @ (a + ad)
    if group == "co":
        return c * c * (pp @ a + ad @ pm)
    if group == "counter":
        return -s * s * (pm @ a + pp @ ad)
    raise ValueError(f"unknown term group {group!r}")


def dressed_interaction_hamiltonian(
    params: DressedStates, g, spec: HilbertSpec, delta1=None, delta2=None, terms=None, ops=None
) -> np.ndarray:
    """Rotating-frame Hamiltonian written on the dressed states.

    ``H0 + sum_l g_l [pi_z (a_l + a_l^dag) cos sin + (pi+ a_l + a_l^dag pi-) cos^2
    - (pi- a_l + pi+ a_l^dag) sin^2]`` with ``H0 = d pi_z/2 - sum_l delta_l n_l``.
    Mode detunings default to the sideband resonance ``delta1 = d``,
    ``delta2 = -d``. ``terms`` (``{1: {...}, 2: {...}}``) restricts the sum
    to the listed groups; ``ops`` substitutes the physical mode operators
    (e.g. their b-basis matrices).
    """
    _need_atom(spec)
    delta1 = params.d if delta1 is None else delta1
    delta2 = -params.d if delta2 is None else delta2
    g1, g2 = _couplings(g)
    a1, a2 = ops if ops is not None else mode_ops(spec)
    h = dressed_free_hamiltonian(params.d, delta1, delta2, spec, (a1, a2))
    for mode, gl, a in ((1, g1, a1), (2, g2, a2)):
        groups = TERM_GROUPS if terms is None else terms.get(mode, ())
        for group in groups:
            h = h + gl * _term(group, a, params.theta, spec)
    return h


@dataclass(frozen=True)
class ResonantTerms:
    """Which term groups are frequency matched, per mode, and all term frequencies."""

    mode1: frozenset
    mode2: frozenset
    frequencies: dict

    def get(self, mode, default=()):
        return {1: self.mode1, 2: self.mode2}.get(mode, default)

    def as_dict(self):
        return {1: self.mode1, 2: self.mode2}

    @property
    def empty(self) -> bool:
        return not (self.mode1 or self.mode2)


def term_frequency(group, delta, d) -> float:
    """Rotation frequency of the annihilating part of a term group under ``H0``.

    With ``H0 = d pi_z/2 - delta n``, ``a(t) = a e^{i delta t}`` and
    ``pi+(t) = pi+ e^{i d t}``.
    """
    return {"displacement": delta, "co": d + delta, "counter": delta - d}[group]


def select_resonant_terms(delta1, delta2, d, tol=None) -> ResonantTerms:
    """Term groups whose rotation frequency vanishes (within ``tol``).

    ``tol`` defaults to ``1e-9 * max(|d|, |delta1|, |delta2|)``; pass a
    coupling-scale tolerance to treat near resonances as resonant.
    """
    values = (delta1, delta2, d)
    if not all(math.isfinite(v) for v in values):
        raise ValueError("frequencies must be finite")
    if tol is None:
        tol = 1e-9 * max(abs(v) for v in values)
    freqs = {}
    chosen = {1: set(), 2: set()}
    for mode, delta in ((1, delta1), (2, delta2)):
        for group in TERM_GROUPS:
            w = term_frequency(group, delta, d)
            freqs[(mode, group)] = w
            if abs(w) <= tol:
                chosen[mode].add(group)
    return ResonantTerms(frozenset(chosen[1]), frozenset(chosen[2]), freqs)


SIDEBAND_TERMS = {1: ("counter",), 2: ("co",)}


def effective_hamiltonian(params: DressedStates, g, spec: HilbertSpec, ops=None) -> np.ndarray:
    """Sideband-resonant Hamiltonian ``H0 + [g (a2^dag cos^2 - a1 sin^2) pi- + h.c.]``.

    ``H0 = d (pi_z/2 - n1 + n2)``.
    """
    _need_atom(spec)
    if getattr(params, "regime_ok", True) is False:
        warnings.warn(RegimeWarning(f"g/d = {params.g / params.d:.3g} is not small"), stacklevel=2)
    g = float(g)
    a1, a2 = ops if ops is not None else mode_ops(spec)
    c2, s2 = math.cos(params.theta) ** 2, math.sin(params.theta) ** 2
    pm = atom_op(PI_MINUS, spec)
    v = g * (a2.conj().T * c2 - a1 * s2) @ pm
    h0 = params.d * (atom_op(PI_Z, spec) / 2 - a1.conj().T @ a1 + a2.conj().T @ a2)
    return h0 + v + v.conj().T


def bogoliubov_jc_hamiltonian(params: DressedParams, spec: HilbertSpec, *, free=True) -> np.ndarray:
    """Jaynes-Cummings form of the effective Hamiltonian in the b basis.

    ``Delta > 0``: ``H0 - Omega_b (b1 pi- + b1^dag pi+)``;
    ``Delta < 0``: ``H0 + Omega_b (b2^dag pi- + b2 pi+)``;
    ``H0 = d (pi_z/2 - n_b1 + n_b2)``. With ``free=False`` only the
    coupling is returned (interaction picture; it commutes with ``H0``).
    """
    _need_atom(spec)
    if params.delta_sign == 0:
        raise RegimeError("Delta = 0 has no Jaynes-Cummings form")
    b1, b2 = mode_ops(spec)
    pp, pm = atom_op(PI_PLUS, spec), atom_op(PI_MINUS, spec)
    if params.delta_sign > 0:
        h = -params.Omega_b * (b1 @ pm + b1.T @ pp)
    else:
        h = params.Omega_b * (b2.T @ pm + b2 @ pp)
    if free:
        h = h + params.d * (atom_op(PI_Z, spec) / 2 - b1.T @ b1 + b2.T @ b2)
    return h


class JitterCoupling:
    """Interaction-picture coupling for atoms whose drive differs from nominal.

    The cavity modes stay on the nominal sidebands; each atom's splitting
    ``d'`` and mixing angle ``theta'`` follow its own drive. Keeping the
    terms resonant in the nominal frame leaves
    ``g [(a2^dag cos^2 theta' - a1 sin^2 theta') pi- + h.c.] + (d' - d) pi_z / 2``.
    Operator pieces are built once; each call only recombines them.
    """

    def __init__(self, g, spec: HilbertSpec, basis="b", r=None):
        _need_atom(spec)
        a1, a2 = physical_mode_ops(spec, basis, r)
        pm = atom_op(PI_MINUS, spec)
        self.g = float(g)
        self._co = a2.conj().T @ pm
        self._counter = a1 @ pm
        self._pz = atom_op(PI_Z, spec)

    def __call__(self, nominal_d, actual: DressedStates) -> np.ndarray:
        c2, s2 = math.cos(actual.theta) ** 2, math.sin(actual.theta) ** 2
        v = self.g * (c2 * self._co - s2 * self._counter)
        return v + v.conj().T + (actual.d - nominal_d) / 2 * self._pz


def jittered_interaction(nominal: DressedParams, actual: DressedStates, g, spec: HilbertSpec, basis, r):
    """One-off form of :class:`JitterCoupling`."""
    return JitterCoupling(g, spec, basis, r)(nominal.d, actual)


def _reduced_field(psi, spec):
    m = psi.reshape(spec.field_dim, 2)
    return m @ m.conj().T


def rwa_error(params: DressedParams, g, spec: HilbertSpec, tau, *, reference=None, phase_average=False) -> float:
    """Trace distance between field states after one kick of duration ``tau``.

    Evolves a reference state for ``tau`` under (a) the full dressed
    Hamiltonian with all term groups and (b) the sideband-resonant
    effective Hamiltonian, traces out the atom and returns
    ``||rho_a - rho_b||_1 / 2``. The default reference is the protocol's
    injected atom (``|+>`` for ``Delta > 0``, ``|->`` otherwise) times the
    target field ``|0,0>_b``.

    With ``phase_average`` the two channels are averaged over the arrival
    instant within one period of ``H0`` before comparison, which removes
    the first-order displacement error of randomly timed atoms.
    """
    _need_atom(spec)
    if g == 0:
        return 0.0
    if reference is None:
        field = tmsv_state(params.r_mu, spec.field_only()).data
        atom = ATOM_PLUS if params.delta_sign > 0 else ATOM_MINUS
        reference = np.kron(field, atom)
    reference = np.asarray(reference, dtype=complex)
    h_full = dressed_interaction_hamiltonian(params, g, spec)
    h_eff = effective_hamiltonian(params, g, spec)
    u_full = expm(-1j * h_full * tau)
    u_eff = expm(-1j * h_eff * tau)
    if not phase_average:
        rho_a = _reduced_field(u_full @ reference, spec)
        rho_b = _reduced_field(u_eff @ reference, spec)
    else:
        h0 = np.real(np.diag(dressed_free_hamiltonian(params.d, params.d, -params.d, spec)))
        period = 4 * math.pi / params.d  # spectrum of H0 lies on a d/2 grid
        samples = 16
        rho_a = rho_b = 0.0
        for t0 in np.arange(samples) * period / samples:
            start = np.exp(-1j * h0 * t0) * reference
            back = np.exp(1j * h0 * (t0 + tau))
            rho_a = rho_a + _reduced_field(back * (u_full @ start), spec) / samples
            rho_b = rho_b + _reduced_field(back * (u_eff @ start), spec) / samples
    return float(0.5 * np.abs(np.linalg.eigvalsh(rho_a - rho_b)).sum())
