import math
import warnings

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from conftest import kirchhoff_smatrix
from stargraph.coupling import (VertexCoupling, assemble_limit_system, asymptotic_smatrix,
                                discrete_spectrum, limit_smatrix, limit_smatrix_cramer,
                                matching_defect, secular_matrix)
from stargraph.errors import ValidationError

Q11 = -math.pi ** 2 / 4
SWAP = np.array([[0, -1, 0], [-1, 0, 0], [0, 0, -1]], dtype=complex)


def two_wells(lam):
    return VertexCoupling(3, 1, [[-1.0, 0.0]], [[Q11]], lam)


def random_coupling(rng, n=None, m=None, lam=None):
    n = n or int(rng.integers(1, 6))
    m = int(rng.integers(0, n + 1)) if m is None else m
    q = rng.normal(size=(m, m))
    lam = float(rng.normal(scale=2.0)) if lam is None else lam
    return VertexCoupling(n, m, rng.normal(size=(m, n - m)), q + q.T, lam,
                          edges=tuple(rng.permutation(n)))


def pencil_kappas(c):
    """Positive roots of det(M0 + kappa M1) as generalised eigenvalues; independent of the scan."""
    M0 = secular_matrix(c, 0.0)
    M1 = secular_matrix(c, 1.0) - M0
    ev = scipy.linalg.eigvals(M0, -M1)
    ev = ev[np.isfinite(ev)]
    return np.sort(ev[(np.abs(ev.imag) < 1e-9) & (ev.real > 1e-9)].real)


def test_assemble_examples():
    A, rhs = assemble_limit_system(VertexCoupling.dirichlet(2), 1.0)
    np.testing.assert_array_equal(A, np.eye(2))
    np.testing.assert_array_equal(rhs[:, 0], [-1, 0])
    A, _ = assemble_limit_system(VertexCoupling.kirchhoff(3), 1.0)
    np.testing.assert_array_equal(A, [[1j, 1j, 1j], [-1, 1, 0], [-1, 0, 1]])
    A, _ = assemble_limit_system(two_wells(1.0), 2.0)
    np.testing.assert_allclose(A, [[2j + math.pi ** 2 / 4, -2j, 0], [1, 1, 0], [0, 0, 1]],
                               atol=1e-15)


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0, 7.0])
def test_limit_smatrix_examples(k):
    for n in (1, 2, 4):
        np.testing.assert_allclose(limit_smatrix(VertexCoupling.dirichlet(n), k).entries, -np.eye(n),
                                   atol=1e-15)
    np.testing.assert_allclose(limit_smatrix(VertexCoupling.kirchhoff(3), k).entries,
                               kirchhoff_smatrix(3), atol=1e-10)
    np.testing.assert_allclose(limit_smatrix(two_wells(0.0), k).entries, SWAP, atol=1e-10)


def test_asymptotic_examples():
    np.testing.assert_allclose(asymptotic_smatrix(VertexCoupling.kirchhoff(3)).entries,
                               kirchhoff_smatrix(3), atol=1e-12)
    np.testing.assert_allclose(asymptotic_smatrix(two_wells(1.0)).entries, SWAP, atol=1e-12)


def test_high_k_limit_and_rate():
    c = two_wells(1.0)
    S_inf = asymptotic_smatrix(c).entries
    ks = np.array([10.0, 30.0, 100.0, 300.0, 1000.0])
    gaps = np.array([np.linalg.norm(limit_smatrix(c, k).entries - S_inf, 2) for k in ks])
    assert np.all(np.diff(gaps) < 0) and gaps[-1] < 1e-2
    slope, _ = np.polyfit(np.log(ks), np.log(gaps), 1)
    assert slope == pytest.approx(-1.0, abs=0.02)


@pytest.mark.parametrize("seed", range(20))
def test_low_k_opacity(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 4))
    n = m + int(rng.integers(0, 3))
    lq = np.linalg.qr(rng.normal(size=(m, m)))[0] @ np.diag(rng.uniform(0.5, 3, m) * rng.choice([-1, 1], m))
    c = VertexCoupling(n, m, rng.normal(size=(m, n - m)), lq @ lq.T if seed % 2 else
                       0.5 * (lq + lq.T) + 3 * np.eye(m), 1.0)
    ks = [1e-1, 1e-2, 1e-3, 1e-4]
    gaps = [np.linalg.norm(limit_smatrix(c, k).entries + np.eye(n), 2) for k in ks]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-2


@settings(max_examples=200)
@given(st.integers(0, 2 ** 32 - 1))
def test_unitarity(seed):
    c = random_coupling(np.random.default_rng(seed))
    for k in (0.1, 1.0, 10.0):
        assert limit_smatrix(c, k).unitarity_defect() <= 1e-8
    assert asymptotic_smatrix(c).unitarity_defect() <= 1e-8


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 100), st.floats(0.01, 100))
def test_scale_invariance(seed, k1, k2):
    rng = np.random.default_rng(seed)
    c = random_coupling(rng, lam=0.0)
    diff = limit_smatrix(c, k1).entries - limit_smatrix(c, k2).entries
    assert np.linalg.norm(diff, 2) <= 1e-9
    np.testing.assert_allclose(limit_smatrix(c, k1).entries, asymptotic_smatrix(c).entries,
                               atol=1e-9)


@settings(max_examples=60)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.05, 20))
def test_cramer_consistency(seed, k):
    c = random_coupling(np.random.default_rng(seed), n=int(np.random.default_rng(seed).integers(1, 5)))
    np.testing.assert_allclose(limit_smatrix(c, k).entries, limit_smatrix_cramer(c, k).entries,
                               atol=1e-10)


def test_bound_state_two_wells():
    eig = discrete_spectrum(two_wells(1.0))
    assert len(eig) == 1
    assert eig[0] == pytest.approx(-math.pi ** 4 / 64, abs=1e-8)
    assert discrete_spectrum(two_wells(0.0)) == []
    assert discrete_spectrum(VertexCoupling.kirchhoff(4)) == []
    assert discrete_spectrum(VertexCoupling.dirichlet(2)) == []


@pytest.mark.parametrize("n, qbar, lam", [(3, -1.0, 1.0), (4, 2.0, -0.5), (2, 1.0, 1.0), (5, -0.3, 2.0)])
def test_delta_coupling(n, qbar, lam):
    c = VertexCoupling.delta(n, qbar, lam)
    eig = discrete_spectrum(c)
    # dense determinant scan as the oracle
    grid = np.linspace(1e-4, 10 * (1 + abs(lam * qbar)), 10_000)
    dets = np.array([np.linalg.det(secular_matrix(c, x)) for x in grid])
    changes = np.flatnonzero(np.sign(dets[:-1]) != np.sign(dets[1:]))
    assert len(eig) == len(changes) == (1 if lam * qbar < 0 else 0)
    if eig:
        kappa = -lam * qbar / n
        assert eig[0] == pytest.approx(-kappa ** 2, abs=1e-10)
        assert grid[changes[0]] <= kappa <= grid[changes[0] + 1]


def test_random_spectra_bounded_by_n():
    rng = np.random.default_rng(2024)
    for _ in range(500):
        c = random_coupling(rng)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            eig = discrete_spectrum(c)
        assert len(eig) <= c.n
        expected = sorted(-k * k for k in pencil_kappas(c))
        np.testing.assert_allclose(eig, expected, rtol=1e-8, atol=1e-10)


def test_matching_defect_examples():
    assert not matching_defect(VertexCoupling.kirchhoff(3), [2, 2, 2], [1, -3, 2]).any()
    c = two_wells(1.0)
    d = 0.7
    defect = matching_defect(c, [1.0, -1.0, 0.0], [d, d + Q11, 5.0])
    assert defect[0] == 0.0 and defect[1] == 0.0
    assert defect[2] == pytest.approx(d - (d + Q11) - Q11, abs=1e-15)
    assert not matching_defect(c, np.zeros(3), np.zeros(3)).any()


def test_matching_defect_vanishes_on_scattering_solutions():
    rng = np.random.default_rng(1)
    for _ in range(20):
        c = random_coupling(rng)
        k = 0.8
        S = limit_smatrix(c, k).entries
        for i in range(c.n):
            vals = np.eye(c.n)[i] + S[i]
            ders = 1j * k * (S[i] - np.eye(c.n)[i])
            assert np.abs(matching_defect(c, vals, ders)).max() < 1e-10


def test_invalid_couplings():
    with pytest.raises(ValidationError):
        VertexCoupling(3, 1, [[1, 1]], [[0]], edges=(0, 0, 1))
    with pytest.raises(ValidationError):
        VertexCoupling(3, 2, np.zeros((2, 1)), [[0, 1], [2, 0]])
    with pytest.raises(ValueError):
        limit_smatrix(VertexCoupling.kirchhoff(2), 0.0)
    c = VertexCoupling(3, 1, [[1, 1]], [[0.0]], lam=4.0)
    assert c.scale_invariant
