import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stargraph.model import PotentialSpec, ScalingLaw, StarGraph

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

WELL = -(math.pi / 2) ** 2


@pytest.fixture
def star3():
    return StarGraph.uniform(3)


@pytest.fixture
def two_wells():
    """Square wells of depth -(pi/2)^2 on edges 0 and 1 of a unit three-star."""
    return PotentialSpec.diagonal_wells([WELL, WELL, 0.0], [1.0, 1.0, 1.0])


@pytest.fixture
def untuned():
    return PotentialSpec.diagonal_wells([-1.0, 1.5, -0.5], [1.0, 1.0, 1.0])


@pytest.fixture
def const_law():
    return ScalingLaw((1.0,))


def kirchhoff_smatrix(n):
    """Hand solution of the free star: 2/n everywhere minus the identity."""
    return 2.0 / n * np.ones((n, n)) - np.eye(n)


def square_well_propagator(v, E, h):
    """2x2 propagator of -u'' + (v - E) u = 0 over length h, by sin/cos or sinh/cosh."""
    w = complex(E - v)
    if w == 0:
        return np.array([[1.0, h], [0.0, 1.0]], dtype=complex)
    s = np.sqrt(w)
    return np.array([[np.cos(s * h), np.sin(s * h) / s],
                     [-s * np.sin(s * h), np.cos(s * h)]], dtype=complex)


def diagonal_eps_smatrix(depths, lengths, lam, eps, k):
    """S-matrix of a star with scaled square wells, edge by edge in physical units.

    Unknowns are the common vertex value, the n vertex derivatives and the n
    amplitudes; equations are the value/derivative matching at eps*a_j plus
    the derivative sum.
    """
    n = len(depths)
    S = np.empty((n, n), dtype=complex)
    for i in range(n):
        A = np.zeros((2 * n + 1, 2 * n + 1), dtype=complex)
        b = np.zeros(2 * n + 1, dtype=complex)
        for j, (d, a) in enumerate(zip(depths, lengths)):
            L = eps * a
            P = square_well_propagator(lam * d / eps ** 2, k * k, L)
            ph = np.exp(1j * k * L)
            # value: P00 c + P01 d_j - T_ij ph = delta_ij / ph
            A[2 * j, 0] = P[0, 0]
            A[2 * j, 1 + j] = P[0, 1]
            A[2 * j, 1 + n + j] = -ph
            A[2 * j + 1, 0] = P[1, 0]
            A[2 * j + 1, 1 + j] = P[1, 1]
            A[2 * j + 1, 1 + n + j] = -1j * k * ph
            if i == j:
                b[2 * j] = 1 / ph
                b[2 * j + 1] = -1j * k / ph
        A[2 * n, 1:1 + n] = 1.0
        S[i] = np.linalg.solve(A, b)[1 + n:]
    return S


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
