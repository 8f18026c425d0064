import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import WELL
from stargraph.errors import ConditioningError, DomainError
from stargraph.model import PotentialSpec, ScalingLaw, StarGraph, evaluate_potential
from stargraph.resonance import (core_grid, coupling_data, design_resonant_potential,
                                 kirchhoff_defect_matrix, kronecker_normalize, edgewise_resonant_basis,
                                 resonance_order, resonant_basis)

TOLS = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6]


def test_free_star_has_constant_resonance(star3):
    K = kirchhoff_defect_matrix(star3, PotentialSpec.zero(3))
    assert np.linalg.matrix_rank(K) == 2
    for n in (1, 2, 5):
        g = StarGraph.uniform(n)
        assert resonance_order(kirchhoff_defect_matrix(g, PotentialSpec.zero(n))) == 1
    data = resonant_basis(star3, PotentialSpec.zero(3))
    np.testing.assert_allclose(data.psi[:, :, 0], 1.0, atol=1e-14)
    cp = coupling_data(data, PotentialSpec.zero(3), ScalingLaw())
    np.testing.assert_allclose(cp.theta, [[1.0, 1.0]], atol=1e-14)
    assert not cp.q.any()


def test_two_wells(star3, two_wells):
    K = kirchhoff_defect_matrix(star3, two_wells)
    assert resonance_order(K) == 1
    data = resonant_basis(star3, two_wells)
    x = data.grid.x
    expected = np.stack([np.sin(math.pi * x / 2), -np.sin(math.pi * x / 2), 0 * x], axis=1)
    np.testing.assert_allclose(data.psi[:, :, 0], expected, atol=1e-10)
    assert data.edges[0] == 0
    np.testing.assert_allclose(data.theta, [[-1.0, 0.0]], atol=1e-12)
    cp = coupling_data(data, two_wells, ScalingLaw((1.0, 1.0)))
    assert cp.q[0, 0] == pytest.approx(-math.pi ** 2 / 4, abs=1e-8)
    assert cp.lam == 1.0


@pytest.mark.parametrize("seed", range(5))
def test_untuned_random_wells_are_generic(seed, star3):
    rng = np.random.default_rng(seed)
    spec = PotentialSpec.diagonal_wells(-rng.uniform(0.3, 0.7, 3), [1, 1, 1])
    K = kirchhoff_defect_matrix(star3, spec)
    s = np.linalg.svd(K, compute_uv=False)
    assert s.min() > 1e-3 * s.max()
    data = resonant_basis(star3, spec)
    assert data.order_m == 0
    assert data.theta.shape == (0, 3) and data.psi.shape[2] == 0
    cp = coupling_data(data, spec, ScalingLaw())
    assert cp.q.shape == (0, 0)


def test_three_wells_order_two(star3):
    spec = PotentialSpec.diagonal_wells([WELL] * 3, [1, 1, 1])
    data = resonant_basis(star3, spec)
    assert data.order_m == 2
    cp = coupling_data(data, spec, ScalingLaw())
    assert cp.q[0, 1] == cp.q[1, 0]


def test_design_examples():
    spec = design_resonant_potential(3, 1)
    depths = sum(np.diag(v) for _, _, v in spec.segments)
    np.testing.assert_allclose(depths, [-math.pi ** 2 / 4, -math.pi ** 2 / 4, 0.0], rtol=1e-15)
    spec2 = design_resonant_potential(2, 1, [1.0, 1.0])
    np.testing.assert_allclose(np.diag(evaluate_potential(spec2, 0.5)), [WELL, WELL])
    with pytest.raises(DomainError, match="order must be < n"):
        design_resonant_potential(3, 3)


@pytest.mark.parametrize("n, m", [(n, m) for n in range(2, 7) for m in range(1, n)])
def test_design_order_recovered_on_plateau(n, m):
    g = StarGraph.uniform(n)
    K = kirchhoff_defect_matrix(g, design_resonant_potential(n, m))
    assert {resonance_order(K, tol) for tol in TOLS} == {m}


@settings(max_examples=25)
@given(st.integers(2, 5), st.data())
def test_design_with_random_lengths(n, data):
    m = data.draw(st.integers(1, n - 1))
    lengths = data.draw(st.lists(st.floats(0.3, 2.0), min_size=n, max_size=n))
    spec = design_resonant_potential(n, m, lengths)
    K = kirchhoff_defect_matrix(StarGraph(tuple(lengths)), spec)
    assert resonance_order(K, 1e-8) == m


def _basis_invariants(graph, spec):
    data = resonant_basis(graph, spec)
    m, n = data.order_m, graph.n
    ends = [data.grid.index_of(a) for a in graph.support_lengths]
    res = list(data.resonant_edges)
    vals = data.endpoint_values[res]
    np.testing.assert_allclose(vals, np.eye(m), atol=1e-10)
    psi0, dpsi0 = data.psi[0], data.dpsi[0]
    assert np.abs(psi0 - psi0[:1]).max() <= 1e-10
    assert np.abs(dpsi0.sum(axis=0)).max() <= 1e-10
    for i, idx in enumerate(ends):
        assert np.abs(data.dpsi[idx, i]).max() <= 1e-8
        # psi_i(a_j) read off the trajectory agrees with the stored outer values
        np.testing.assert_allclose(data.psi[idx, i], data.endpoint_values[i], atol=1e-12)
    K = kirchhoff_defect_matrix(graph, spec)
    assert np.abs(K @ data.endpoint_values).max() <= 1e-8
    return data


def test_basis_invariants_on_designed_and_matrix_potentials():
    for n, m in [(3, 1), (4, 2), (5, 3), (6, 5)]:
        g = StarGraph(tuple(0.6 + 0.1 * i for i in range(n)))
        _basis_invariants(g, design_resonant_potential(n, m, g.support_lengths))
    # relabelled edges with unequal lengths
    spec = design_resonant_potential(4, 2, [1.0, 0.8, 1.2, 0.9]).permuted([3, 1, 0, 2])
    data = _basis_invariants(StarGraph((0.9, 0.8, 1.0, 1.2)), spec)
    assert data.order_m == 2


def test_q_quadrature_converges():
    g = StarGraph((1.0, 0.7, 1.3, 0.9))
    spec = design_resonant_potential(4, 2, g.support_lengths)
    qs = [coupling_data(resonant_basis(g, spec, n_grid=N), spec, ScalingLaw()).q for N in (2000, 4000)]
    assert np.abs(qs[0] - qs[1]).max() <= 1e-8
    assert qs[0][0, 1] == qs[0][1, 0]


@pytest.mark.parametrize("n, m", [(3, 1), (4, 2), (5, 4)])
def test_edgewise_basis_round_trip(n, m):
    lengths = tuple(0.8 + 0.15 * i for i in range(n))
    g = StarGraph(lengths)
    spec = design_resonant_potential(n, m, lengths)
    data = resonant_basis(g, spec)
    raw = edgewise_resonant_basis(g, spec, range(m + 1), data.grid)
    ends = [data.grid.index_of(lengths[e]) for e in data.resonant_edges]
    V = np.array([raw[idx, e] for idx, e in zip(ends, data.resonant_edges)])
    normalized = raw @ np.linalg.inv(V)
    assert np.abs(normalized - data.psi).max() <= 1e-8


def test_kronecker_pivoting():
    W, rows = kronecker_normalize(np.array([[0.5, 1.0], [2.0, 0.0], [1.0, 1.0]]))
    assert rows == [1, 0]
    np.testing.assert_allclose(W[rows], np.eye(2), atol=1e-15)
    _, rows = kronecker_normalize(np.array([[1.0], [-1.0], [0.0]]))
    assert rows == [0]
    with pytest.raises(ConditioningError, match="pivot magnitude"):
        kronecker_normalize(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_core_grid_has_all_ends(two_wells):
    g = StarGraph((1.0, 1.0, 0.37))
    grid = core_grid(g, PotentialSpec.zero(3))
    assert grid.x[grid.index_of(0.37)] == 0.37
