import numpy as np
import pytest

from epr_reservoir.fock import HilbertSpec, QuantumState, basis_transform, thermal_state, tmsv_amplitudes, tmsv_state
from epr_reservoir.observables import stored_moments
from epr_reservoir.sectors import SectorState


def _random_symmetric(rng, n1, n2):
    """Random density matrix commuting with n1 - n2, built from charge blocks."""
    dense = np.zeros(((n1 + 1) * (n2 + 1),) * 2, dtype=complex)
    labels = np.subtract.outer(np.arange(n1 + 1), np.arange(n2 + 1)).ravel()
    for L in np.unique(labels):
        idx = np.nonzero(labels == L)[0]
        a = rng.normal(size=(len(idx),) * 2) + 1j * rng.normal(size=(len(idx),) * 2)
        dense[np.ix_(idx, idx)] = a @ a.conj().T
    return QuantumState(dense / np.trace(dense), HilbertSpec(n1, n2), "a")


def test_dense_round_trip(rng):
    st = _random_symmetric(rng, 5, 3)
    back = SectorState.from_dense(st).to_dense()
    assert np.allclose(back.data, st.data)


def test_from_dense_rejects_asymmetric(rng):
    psi = rng.normal(size=16)
    st = QuantumState(psi / np.linalg.norm(psi), HilbertSpec(3, 3), "a")
    with pytest.raises(ValueError):
        SectorState.from_dense(st)


def test_moments_match_dense(rng):
    st = _random_symmetric(rng, 4, 4)
    sec = SectorState.from_dense(st)
    m = stored_moments(st)
    assert sec.mean_number(1) == pytest.approx(m.n1)
    assert sec.mean_number(2) == pytest.approx(m.n2)
    assert sec.pair_moment() == pytest.approx(m.pair)
    assert sec.trace() == pytest.approx(1.0)


def test_squeeze_conjugate_matches_dense(rng):
    st = _random_symmetric(rng, 6, 6)
    r = 0.3
    dense = basis_transform(st, r, "a->b", threshold=np.inf)
    sec = SectorState.from_dense(st).squeeze_conjugate(r)
    assert sec.basis == "b" and sec.r == r
    assert np.allclose(sec.to_dense().data, dense.data)


def test_pure_diagonal_is_tmsv():
    r, n = 0.4, 20
    amps = tmsv_amplitudes(r, n)
    sec = SectorState.from_pure_diagonal(amps / np.linalg.norm(amps), n, n)
    dense = tmsv_state(r, HilbertSpec(n, n)).density_matrix()
    assert np.allclose(sec.to_dense().data, dense)


def test_overlap(rng):
    st = _random_symmetric(rng, 4, 3)
    psi = rng.normal(size=20) + 1j * rng.normal(size=20)
    psi /= np.linalg.norm(psi)
    want = np.real(np.vdot(psi, st.data @ psi))
    assert SectorState.from_dense(st).overlap(psi) == pytest.approx(want)


def test_thermal_matches_dense():
    sec = SectorState.thermal(0.3, 0.7, 10, 8)
    assert np.allclose(sec.to_dense().data, thermal_state(0.3, 0.7, HilbertSpec(10, 8)).data)


def test_partial_transpose_spectrum(rng):
    st = _random_symmetric(rng, 3, 3)
    rho = st.data.reshape(4, 4, 4, 4)
    pt = rho.transpose(0, 3, 2, 1).reshape(16, 16)
    want = np.sort(np.linalg.eigvalsh(pt))
    got = np.sort(np.concatenate([np.linalg.eigvalsh(b) for b in SectorState.from_dense(st).partial_transpose_blocks()]))
    assert np.allclose(got, want)


def test_stack_shape_checked():
    with pytest.raises(ValueError):
        SectorState(np.zeros((3, 4, 4)), 3, 3)
    with pytest.raises(ValueError):
        SectorState(np.zeros((7, 4, 4)), 3, 3, basis="b")
