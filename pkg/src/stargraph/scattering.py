"""Exact on-shell scattering for the scaled operator ``H_eps``.

Inside the shrunken core everything is done in the rescaled variable
``t = x / eps``, where the equation becomes
``-phi'' + lambda(eps) Q(t) phi = (eps k)^2 phi`` on the unit core.  Outside,
the scattering solution is ``delta_ij exp(-iks) + T_ij exp(iks)`` with ``s``
measured from the vertex; value and derivative are matched at
``s = eps a_j``, which puts the phases ``exp(+-i k eps a_j)`` into the
``2n x 2n`` amplitude system.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .coupling import SMatrix, VertexCoupling, assemble_limit_system
from .errors import ConditioningError, DomainError, SingularSystemError
from .model import PotentialSpec, ScalingLaw, StarGraph, evaluate_scaling, validate_potential
from .propagate import Grid, solve_ivp
from .resonance import (DEFAULT_GRID, ResonanceData, core_grid, coupling_data, potential_form,
                        resonant_basis)

__all__ = [
    "FundamentalSystem",
    "kirchhoff_generators",
    "fundamental_system",
    "assemble_eps_system",
    "eps_smatrix",
    "det_ratio",
    "rho_constant",
    "fredholm_residual",
]

COND_LIMIT = 1e13


def kirchhoff_generators(n: int) -> np.ndarray:
    """Vertex states ``(u(0), u'(0))`` spanning the Kirchhoff subspace, as columns.

    Column 0 is the common value; column ``j >= 1`` has zero values and
    derivatives ``e_{j-1} - e_{n-1}``.
    """
    G = np.zeros((2 * n, n))
    G[:n, 0] = 1.0
    for j in range(1, n):
        G[n + j - 1, j] = 1.0
        G[2 * n - 1, j] = -1.0
    return G


@dataclass(frozen=True, eq=False)
class FundamentalSystem:
    """``n`` Kirchhoff solutions on the unit core; column ``j`` is ``phi_j``.

    ``values[i, j] = phi_j(a_i)`` and ``derivs[i, j]`` is the derivative of
    ``phi_j`` at ``a_i`` along edge ``i`` (away from the vertex).  ``states``
    holds ``(u, u')`` samples of shape ``(len(grid.x), 2n, n)``.
    """

    eps: float
    k: float
    lengths: tuple
    grid: Grid
    states: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    basis_change: np.ndarray
    normalized: bool
    resonance: ResonanceData | None = None

    @property
    def n(self) -> int:
        return len(self.lengths)

    @property
    def phi(self) -> np.ndarray:
        return self.states[:, : self.n, :]


def _normalizing_basis(data: ResonanceData) -> np.ndarray:
    """Coefficients (in the generator basis) of ``psi_1..psi_m`` followed by a complement."""
    n, m = len(data.edges), data.order_m
    R = np.empty((n, m))
    R[0] = data.psi[0].mean(axis=0)
    R[1:] = data.dpsi[0, : n - 1, :]
    comp = scipy.linalg.null_space(R.T) if m else np.eye(n)
    return np.hstack([R, comp])


def fundamental_system(graph: StarGraph, spec: PotentialSpec, scaling: ScalingLaw, eps: float,
                       k: float, normalized: bool = False, n_grid: int = DEFAULT_GRID,
                       samples: bool = True, resonance: ResonanceData | None = None,
                       svd_tol: float = 1e-8, method: str = "auto") -> FundamentalSystem:
    """Solutions of ``-phi'' + lambda(eps) Q phi = (eps k)^2 phi`` with Kirchhoff vertex data.

    ``eps = 0`` gives the zero-energy system of the unscaled potential.  With
    ``normalized=True`` the first ``m`` columns tend to the resonant basis as
    ``eps -> 0`` and the rest span a fixed complement.  ``samples=False``
    skips the interior grid and only computes the endpoint data.
    """
    if not 0 <= eps <= 1:
        raise DomainError(f"eps={eps} outside (0, 1]")
    if not k > 0:
        raise DomainError("momentum k must be positive")
    validate_potential(graph, spec)
    n = graph.n
    lam_eps = evaluate_scaling(scaling, eps)
    E = (eps * k) ** 2
    if normalized:
        if resonance is None:
            resonance = resonant_basis(graph, spec, svd_tol, n_grid, method)
        B = _normalizing_basis(resonance)
    else:
        B = np.eye(n)
    if samples:
        grid = core_grid(graph, spec, n_grid)
    else:
        pts = np.unique(graph.support_lengths)
        grid = Grid(pts, (0, len(pts) - 1))
    G = kirchhoff_generators(n) @ B
    states = solve_ivp(spec, lam_eps, E, 0.0, G, grid.x, method=method)
    values = np.empty((n, n))
    derivs = np.empty((n, n))
    for i, a in enumerate(graph.support_lengths):
        row = states[grid.index_of(a)]
        values[i] = row[i]
        derivs[i] = row[n + i]
    s = np.linalg.svd(np.vstack([values, derivs]), compute_uv=False)
    if s[-1] <= 1e-10 * s[0]:
        raise ConditioningError(f"fundamental system is degenerate (sigma_min/sigma_max={s[-1] / s[0]:.2e})")
    return FundamentalSystem(float(eps), float(k), graph.support_lengths, grid, states, values,
                             derivs, B, normalized, resonance)


def assemble_eps_system(fs: FundamentalSystem, order=None):
    """``2n x 2n`` matrix and right-hand sides (columns) for ``(T_i., C_i.)``.

    Row pair ``(2r, 2r + 1)`` matches value and scaled derivative on edge
    ``order[r]`` (default: natural order) at ``s = eps a``.
    """
    n = fs.n
    order = list(range(n)) if order is None else list(order)
    k, eps = fs.k, fs.eps
    A = np.zeros((2 * n, 2 * n), dtype=complex)
    rhs = np.zeros((2 * n, n), dtype=complex)
    for r, i in enumerate(order):
        ph = np.exp(1j * k * eps * fs.lengths[i])
        A[2 * r, r] = -ph
        A[2 * r + 1, r] = -1j * k * eps * ph
        A[2 * r, n:] = fs.values[i]
        A[2 * r + 1, n:] = fs.derivs[i]
        rhs[2 * r, r] = 1.0 / ph
        rhs[2 * r + 1, r] = -1j * k * eps / ph
    return A, rhs


def eps_smatrix(graph: StarGraph, spec: PotentialSpec, scaling: ScalingLaw, eps: float, k: float,
                return_coefficients: bool = False, method: str = "auto"):
    """S-matrix of ``H_eps`` at momentum ``k`` (original edge order).

    With ``return_coefficients=True`` also returns the interior coefficients
    ``C[i, j]`` of the scattering solution for incidence on edge ``i``.
    """
    if not 0 < eps <= 1:
        raise DomainError(f"eps={eps} outside (0, 1]")
    fs = fundamental_system(graph, spec, scaling, eps, k, samples=False, method=method)
    A, rhs = assemble_eps_system(fs)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularSystemError(
            f"eps amplitude system singular (cond={cond:.3e}, det={np.linalg.det(A):.3e})")
    X = scipy.linalg.lu_solve(scipy.linalg.lu_factor(A), rhs).T
    S = SMatrix(float(k), X[:, : graph.n].copy())
    if return_coefficients:
        return S, X[:, graph.n:].copy()
    return S


def _internal_derivs(fs: FundamentalSystem, edges):
    return fs.derivs[list(edges)]


def rho_constant(graph: StarGraph, spec: PotentialSpec, resonance: ResonanceData | None = None,
                 n_grid: int = DEFAULT_GRID, svd_tol: float = 1e-8) -> float:
    """Signed determinant of the non-resonant outer-derivative block at ``eps = 0``."""
    if resonance is None:
        resonance = resonant_basis(graph, spec, svd_tol, n_grid)
    fs0 = fundamental_system(graph, spec, ScalingLaw(), 0.0, 1.0, normalized=True,
                             n_grid=n_grid, resonance=resonance)
    n, m = graph.n, resonance.order_m
    D = _internal_derivs(fs0, resonance.edges)[m:, m:]
    sign = (-1) ** (n * (n + 1) // 2 + m)
    return float(sign * np.linalg.det(D)) if n > m else float(sign)


def det_ratio(graph: StarGraph, spec: PotentialSpec, scaling: ScalingLaw, eps: float, k: float,
              resonance: ResonanceData | None = None, n_grid: int = DEFAULT_GRID,
              svd_tol: float = 1e-8) -> complex:
    """``det A_eps / (eps^m det A)`` in the internal (resonant-first) edge order."""
    if resonance is None:
        resonance = resonant_basis(graph, spec, svd_tol, n_grid)
    coupling = coupling_data(resonance, spec, scaling)
    fs = fundamental_system(graph, spec, scaling, eps, k, normalized=True, n_grid=n_grid,
                            resonance=resonance)
    A_eps, _ = assemble_eps_system(fs, order=resonance.edges)
    A_lim, _ = assemble_limit_system(coupling, k)
    return complex(np.linalg.det(A_eps) / (eps ** resonance.order_m * np.linalg.det(A_lim)))


def fredholm_residual(graph: StarGraph, spec: PotentialSpec, scaling: ScalingLaw, eps: float,
                      k: float, resonance: ResonanceData | None = None,
                      n_grid: int = DEFAULT_GRID, svd_tol: float = 1e-8) -> np.ndarray:
    """``m x n`` residual of the outer-derivative identity for the normalised system.

    Entry ``(i, j)`` is ``phi_j'(a_i) + sum_l theta_il phi_j'(a_l) - eps lam q^eps_ij``
    (edges in internal order, ``l`` over non-resonant edges), with
    ``q^eps_ij = int Q psi_i phi_j``; it is ``O(eps^2)``.
    """
    if resonance is None:
        resonance = resonant_basis(graph, spec, svd_tol, n_grid)
    fs = fundamental_system(graph, spec, scaling, eps, k, normalized=True, n_grid=n_grid,
                            resonance=resonance)
    m = resonance.order_m
    D = _internal_derivs(fs, resonance.edges)
    q_eps = potential_form(fs.grid, spec, resonance.psi, fs.phi)
    theta = resonance.theta
    return D[:m] + theta @ D[m:] - eps * scaling.lambda_prime * q_eps
