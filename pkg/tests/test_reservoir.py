import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from epr_reservoir.dressed import squeeze_params_for_mu
from epr_reservoir.errors import RegimeWarning
from epr_reservoir.fock import HilbertSpec, QuantumState, fock_state, tmsv_amplitudes, vacuum_state
from epr_reservoir.hamiltonians import bogoliubov_jc_hamiltonian
from epr_reservoir.observables import mean_photon
from epr_reservoir.reservoir import (
    KickChannel,
    ReservoirParams,
    damping_generator,
    damping_propagators,
    kick_map,
    lindblad_evolve,
    lindblad_trajectory,
    poisson_arrivals,
    pure_loss_element,
    single_mode_kraus,
)
from epr_reservoir.sectors import SectorState

P = squeeze_params_for_mu(0.5, 1.0, 0.01)


def _random_rho(rng, dim, rank=None):
    a = rng.normal(size=(dim, rank or dim)) + 1j * rng.normal(size=(dim, rank or dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def _b_state(rho, spec):
    return QuantumState(rho, spec, "b", P.r_mu)


# --- parameters ---------------------------------------------------------------


def test_gamma_derived_from_beam():
    res = ReservoirParams(r_at=5.0, tau=0.01, Omega_b=5.0)
    assert res.gamma == pytest.approx(5.0 * (5.0 * 0.01) ** 2)
    assert res.kick_angle == pytest.approx(0.05)


def test_with_coupling_derives_rate():
    res = ReservoirParams(gamma=2.5e-3, tau=0.05).with_coupling(1.0)
    assert res.r_at == pytest.approx(2.5e-3 / 0.05**2)


def test_params_validation():
    with pytest.raises(ValueError):
        ReservoirParams()
    with pytest.raises(ValueError):
        ReservoirParams(r_at=1.0)
    with pytest.raises(ValueError):
        ReservoirParams(gamma=-1.0)
    with pytest.raises(ValueError):
        ReservoirParams(gamma=1.0, r_at=1.0, tau=0.1)
    with pytest.raises(ValueError):
        ReservoirParams(gamma=1.0, r_at=1.0, tau=0.1, Omega_b=1.0)
    with pytest.raises(ValueError):
        ReservoirParams(gamma=1.0, jitter_std=-0.1)


def test_params_warn_on_strong_kicks():
    with pytest.warns(RegimeWarning):
        ReservoirParams(r_at=1.0, tau=1.0, Omega_b=0.5)
    with pytest.warns(RegimeWarning, match="overlap"):
        ReservoirParams(r_at=1.0, tau=0.5, Omega_b=0.1)


# --- kicks --------------------------------------------------------------------


def _channel(spec, angle, atom="+", params=P):
    h = bogoliubov_jc_hamiltonian(params, spec.with_atom(), free=False)
    return KickChannel.from_hamiltonian(h, angle / params.Omega_b, atom, spec)


def test_vacuum_is_dark():
    spec = HilbertSpec(4, 4)
    rho = vacuum_state(spec, "b", P.r_mu)
    out = kick_map(rho, "+", bogoliubov_jc_hamiltonian(P, spec.with_atom(), free=False), 0.3 / P.Omega_b)
    assert np.allclose(out.data, rho.density_matrix())


def test_single_photon_kick():
    spec = HilbertSpec(3, 2)
    angle = 0.4
    rho = fock_state(1, 0, spec, "b", P.r_mu).density_matrix()
    out = _b_state(_channel(spec, angle).apply(rho), spec)
    assert mean_photon(out, 1) == pytest.approx(1 - math.sin(angle) ** 2, abs=1e-12)


def test_kick_second_order(rng):
    spec = HilbertSpec(6, 2)
    x = 1e-3
    rho = _random_rho(rng, spec.dim)
    b = np.kron(np.diag(np.sqrt(np.arange(1, 7)), 1), np.eye(3))
    nb = b.T @ b
    want = -(x**2) / 2 * (nb @ rho - 2 * b @ rho @ b.T + rho @ nb)
    got = _channel(spec, x).apply(rho) - rho
    assert np.max(np.abs(got - want)) / np.max(np.abs(want)) < 1e-4


def test_kick_matches_closed_form():
    spec = HilbertSpec(7, 1)
    angle = 0.3
    ch = _channel(spec, angle)
    k0, k1 = single_mode_kraus(7, angle, "+", "absorb")
    eye = np.eye(2)
    assert np.allclose(ch.kraus[0].toarray(), np.kron(k0, eye), atol=1e-12)
    assert np.allclose(ch.kraus[1].toarray(), np.kron(k1, eye), atol=1e-12)


def test_kick_trace_preserving(rng):
    spec = HilbertSpec(4, 4)
    ch = _channel(spec, 0.2)
    assert ch.completeness_error() < 1e-12
    rho = _random_rho(rng, spec.dim)
    assert np.trace(ch.apply(rho)).real == pytest.approx(1.0)


def test_step2_damps_mode2():
    q = squeeze_params_for_mu(0.5, 1.0, 0.01, -1)
    spec = HilbertSpec(3, 3)
    rho = fock_state(0, 1, spec, "b", q.r_mu).density_matrix()
    out = QuantumState(_channel(spec, 0.5, "-", q).apply(rho), spec, "b", q.r_mu)
    assert mean_photon(out, 2) == pytest.approx(math.cos(0.5) ** 2, abs=1e-12)
    assert mean_photon(out, 1) == pytest.approx(0.0, abs=1e-14)


def test_superoperator_matches_kraus_sum(rng):
    spec = HilbertSpec(3, 3)
    ch = _channel(spec, 0.25)
    rho = _random_rho(rng, spec.dim)
    direct = sum(k @ rho @ kd for k, kd in zip((k.toarray() for k in ch.kraus), (k.toarray().conj().T for k in ch.kraus)))
    assert np.allclose(ch.apply(rho), direct)


def test_kick_rejects_wrong_shape():
    with pytest.raises(ValueError):
        KickChannel.from_hamiltonian(np.eye(4), 1.0, "+", HilbertSpec(2, 2))


# --- arrivals -----------------------------------------------------------------


def test_arrival_count():
    r_at, T = 50.0, 400.0
    t = poisson_arrivals(r_at, T, 7)
    assert abs(len(t) - r_at * T) < 4 * math.sqrt(r_at * T)
    assert np.all(np.diff(t) > 0) and t[-1] < T


def test_arrivals_deterministic():
    a = poisson_arrivals(3.0, 100.0, 11)
    b = poisson_arrivals(3.0, 100.0, np.random.SeedSequence(11))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, poisson_arrivals(3.0, 100.0, 12))


def test_gap_distribution():
    r_at = 2.0
    t = poisson_arrivals(r_at, 5200.0, 3)
    gaps = np.diff(np.concatenate([[0.0], t]))[:10_000]
    assert len(gaps) == 10_000
    assert stats.kstest(gaps, "expon", args=(0, 1 / r_at)).pvalue > 1e-3


def test_arrivals_validate():
    with pytest.raises(ValueError):
        poisson_arrivals(0.0, 1.0, 0)


# --- damping ------------------------------------------------------------------


def _tmsv_b_vacuum(n):
    amps = tmsv_amplitudes(P.r_mu, n) * (-1.0) ** np.arange(n + 1)
    return SectorState.from_pure_diagonal(amps / np.linalg.norm(amps), n, n, "b", P.r_mu)


@pytest.mark.parametrize("mode", [1, 2])
def test_decay_law(mode):
    st_ = _tmsv_b_vacuum(12)
    n0 = st_.mean_number(mode)
    for gt in np.linspace(0, 8, 17)[1:]:
        nt = lindblad_evolve(st_, 1.0, mode, gt).mean_number(mode)
        assert nt == pytest.approx(n0 * math.exp(-gt), rel=1e-10)


def test_vacuum_fixed_point():
    st_ = vacuum_state(HilbertSpec(5, 5), "b", P.r_mu)
    out = lindblad_evolve(st_, 0.7, 1, 3.0)
    assert np.allclose(out.data, st_.density_matrix())


def test_coherence_decay():
    spec = HilbertSpec(3, 1)
    psi = (fock_state(0, 0, spec, "b", 0.1).data + fock_state(1, 0, spec, "b", 0.1).data) / math.sqrt(2)
    st_ = QuantumState(psi, spec, "b", 0.1)
    for gt in (0.3, 1.0, 4.0):
        rho = lindblad_evolve(st_, 1.0, 1, gt).data
        i0, i1 = 0, spec.n_max2 + 1
        assert rho[i0, i1] == pytest.approx(0.5 * math.exp(-gt / 2), rel=1e-12)


def test_exact_matches_adaptive(rng):
    spec = HilbertSpec(5, 4)
    st_ = _b_state(_random_rho(rng, spec.dim), spec)
    for mode in (1, 2):
        exact = lindblad_evolve(st_, 0.4, mode, 2.5)
        adaptive = lindblad_evolve(st_, 0.4, mode, 2.5, method="adaptive")
        assert np.max(np.abs(exact.data - adaptive.data)) < 1e-9


def test_exact_matches_pure_loss(rng):
    spec = HilbertSpec(6, 1)
    rho = _random_rho(rng, spec.dim)
    out = lindblad_evolve(_b_state(rho, spec), 1.0, 1, 0.8).data.reshape(7, 2, 7, 2)
    t = rho.reshape(7, 2, 7, 2)
    eta = math.exp(-0.8)
    for n in range(7):
        for m in range(7):
            want = pure_loss_element(lambda i, j: t[i, 1, j, 0], n, m, eta, 6)
            assert out[n, 1, m, 0] == pytest.approx(want, abs=1e-12)


def test_sector_matches_dense():
    st_ = _tmsv_b_vacuum(8)
    a = lindblad_evolve(st_, 1.0, 1, 1.3)
    b = lindblad_evolve(st_.to_dense(), 1.0, 1, 1.3)
    assert np.allclose(a.to_dense().data, b.data, atol=1e-14)


def test_a_basis_route():
    r = 0.3
    spec = HilbertSpec(12, 12)
    from epr_reservoir.observables import moments

    out = lindblad_evolve(vacuum_state(spec), 1.0, 1, 1.0, method="adaptive", r=r)
    assert moments(out, "b", r).n1 == pytest.approx(math.sinh(r) ** 2 * math.exp(-1.0), rel=1e-3)
    with pytest.raises(ValueError):
        lindblad_evolve(vacuum_state(spec), 1.0, 1, 1.0)


def test_trajectory_composes():
    st_ = _tmsv_b_vacuum(8)
    traj = lindblad_trajectory(st_, 1.0, 1, [0.5, 1.0, 2.0])
    direct = lindblad_evolve(st_, 1.0, 1, 2.0)
    assert np.allclose(traj[-1].stack, direct.stack)
    with pytest.raises(ValueError):
        lindblad_trajectory(st_, 1.0, 1, [1.0, 0.5])


@settings(max_examples=20, deadline=None)
@given(st.integers(-5, 5), st.floats(0.0, 6.0))
def test_propagators_preserve_trace_columns(k, gt):
    # column sums of the k = 0 propagator are 1 (population conserved)
    props = damping_propagators(5, gt)
    assert np.allclose(props[0].sum(axis=0), 1.0)
    assert np.all(np.abs(props[k]) <= 1 + 1e-12)


def test_generator_shape():
    g = damping_generator(2, 4)
    assert g.shape == (4, 4)
    assert g[0, 0] == pytest.approx(-(2 + 0) / 2)


def test_evolve_argument_checks():
    st_ = _tmsv_b_vacuum(4)
    with pytest.raises(ValueError):
        lindblad_evolve(st_, 1.0, 3, 1.0)
    with pytest.raises(ValueError):
        lindblad_evolve(st_, -1.0, 1, 1.0)
    assert lindblad_evolve(st_, 1.0, 1, 0.0) is st_
