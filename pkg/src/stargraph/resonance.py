"""Zero-energy resonances of a star graph with a compactly supported potential.

A resonant solution solves ``-psi'' + Q psi = 0`` on the core, obeys the
Kirchhoff conditions at the vertex and the Neumann condition at every outer
end ``a_i``.  Because the equation for component ``i`` is free beyond
``a_i``, all components can be propagated on the common interval ``[0, A]``
(``A = max a_i``) with a Neumann condition at ``A``; the outer values
``psi_i(A) = psi_i(a_i)`` then parametrise the whole family.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, DomainError
from .model import (PotentialSpec, ScalingLaw, StarGraph, evaluate_potential,
                    validate_potential)
from .propagate import Grid, make_grid, solve_ivp, transfer_matrix

__all__ = [
    "ResonanceData",
    "kirchhoff_defect_matrix",
    "resonance_order",
    "resonant_basis",
    "coupling_data",
    "design_resonant_potential",
    "edgewise_resonant_basis",
    "potential_form",
    "kronecker_normalize",
    "core_grid",
]

DEFAULT_GRID = 2000


def core_grid(graph: StarGraph, spec: PotentialSpec, n_points: int = DEFAULT_GRID) -> Grid:
    """Shared grid on ``[0, max a_i]`` through every potential breakpoint and every ``a_i``."""
    bp = np.concatenate([spec.breakpoints(), graph.support_lengths])
    return make_grid(bp, graph.max_length, n_points)


def kirchhoff_defect_matrix(graph: StarGraph, spec: PotentialSpec, method: str = "auto"):
    """Vertex defects of the Neumann family, one column per outer end.

    Column ``j`` starts from ``u(a_j) = e_j``, ``u' = 0`` at the outer ends and
    propagates to the vertex; its entries are the ``n - 1`` continuity
    differences ``u_i(0) - u_{i+1}(0)`` followed by the derivative sum.
    """
    validate_potential(graph, spec)
    n, A = graph.n, graph.max_length
    M = transfer_matrix(spec, 1.0, 0.0, A, 0.0, method=method).matrix
    U0, D0 = M[:n, :n], M[n:, :n]
    K = np.empty((n, n))
    K[:n - 1] = U0[:-1] - U0[1:]
    K[n - 1] = D0.sum(axis=0)
    return K


def resonance_order(K, svd_tol: float = 1e-8) -> int:
    """Number of singular values of ``K`` at or below ``svd_tol * sigma_max``."""
    s = np.linalg.svd(np.asarray(K, dtype=float), compute_uv=False)
    if s.max() == 0:
        return len(s)
    return int(np.sum(s <= svd_tol * s.max()))


def _kernel(K, m):
    if m == 0:
        return np.zeros((K.shape[1], 0))
    _, _, vt = np.linalg.svd(K)
    return vt[-m:].T.copy()


def kronecker_normalize(V, pivot_tol: float = 1e-8):
    """Recombine the columns of ``V`` (outer values of a basis) into Kronecker form.

    Returns ``(W, rows)`` with ``W[rows[t], s] == delta_ts``.  Each step picks
    the outer end with the largest remaining magnitude (lowest index on ties).
    """
    W = np.array(V, dtype=float)
    n, m = W.shape
    scale = np.abs(W).max() if W.size else 1.0
    rows = []
    for s in range(m):
        cand = np.array([r for r in range(n) if r not in rows])
        mag = np.abs(W[cand, s])
        best = mag.max()
        if best <= pivot_tol * scale:
            raise ConditioningError(
                f"Kronecker normalisation failed: pivot magnitude {best:.3e} for basis vector {s}")
        b = int(cand[np.flatnonzero(mag >= best * (1 - 1e-9))[0]])
        W[:, s] /= W[b, s]
        for t in range(m):
            if t != s:
                W[:, t] -= W[b, t] * W[:, s]
        rows.append(b)
    return W, rows


@dataclass(frozen=True, eq=False)
class ResonanceData:
    """Resonant basis normalised so that ``psi_i(a_{edges[j]}) = delta_ij`` for ``i, j < m``.

    ``edges`` lists original edge indices with the ``m`` resonant ends first
    (the renumbering); ``endpoint_values[:, i]`` are the outer values of
    ``psi_i`` in original labelling; ``psi``/``dpsi`` hold samples of shape
    ``(len(grid.x), n, m)``, also in original labelling.
    """

    order_m: int
    edges: tuple
    grid: Grid
    psi: np.ndarray
    dpsi: np.ndarray
    endpoint_values: np.ndarray
    singular_values: np.ndarray

    @property
    def resonant_edges(self) -> tuple:
        return tuple(self.edges[: self.order_m])

    @property
    def theta(self) -> np.ndarray:
        """``theta[i, j] = psi_i(a_{edges[m + j]})``, shape ``(m, n - m)``."""
        m = self.order_m
        return self.endpoint_values[list(self.edges[m:]), :].T.copy()


def resonant_basis(graph: StarGraph, spec: PotentialSpec, svd_tol: float = 1e-8,
                   n_grid: int = DEFAULT_GRID, method: str = "auto") -> ResonanceData:
    K = kirchhoff_defect_matrix(graph, spec, method)
    s = np.linalg.svd(K, compute_uv=False)
    m = resonance_order(K, svd_tol)
    n, A = graph.n, graph.max_length
    W, rows = kronecker_normalize(_kernel(K, m))
    edges = tuple(rows) + tuple(j for j in range(n) if j not in rows)
    grid = core_grid(graph, spec, n_grid)
    state = np.vstack([W, np.zeros((n, m))])
    traj = solve_ivp(spec, 1.0, 0.0, A, state, grid.x[::-1], method=method)[::-1]
    return ResonanceData(
        order_m=m,
        edges=edges,
        grid=grid,
        psi=traj[:, :n, :],
        dpsi=traj[:, n:, :],
        endpoint_values=W,
        singular_values=s,
    )


def potential_form(grid: Grid, spec: PotentialSpec, left, right) -> np.ndarray:
    """``F[i, j] = int sum_kl Q_kl(x) left[x, k, i] right[x, l, j] dx`` by piecewise Simpson.

    ``left``/``right`` are samples of shape ``(len(grid.x), n, p)``; each grid
    piece lies inside one constant piece of ``Q``, whose value is used on the
    whole piece including its endpoints.
    """
    left, right = np.asarray(left), np.asarray(right)
    out = 0.0
    x = grid.x
    for i0, i1 in zip(grid.knots[:-1], grid.knots[1:]):
        Q = evaluate_potential(spec, 0.5 * (x[i0] + x[i1]))
        if not Q.any():
            continue
        integrand = np.einsum("kl,xki,xlj->xij", Q, left[i0:i1 + 1], right[i0:i1 + 1])
        out = out + Grid(x[i0:i1 + 1], (0, i1 - i0)).integrate(integrand)
    if np.isscalar(out):
        return np.zeros((left.shape[2], right.shape[2]), dtype=np.result_type(left, right))
    return out


def coupling_data(data: ResonanceData, spec: PotentialSpec, scaling: ScalingLaw):
    """Limit vertex coupling ``(theta, q, lambda)`` from a normalised resonant basis."""
    from .coupling import VertexCoupling

    m = data.order_m
    q = potential_form(data.grid, spec, data.psi, data.psi)
    q = 0.5 * (q + q.T)
    q = np.triu(q) + np.triu(q, 1).T
    return VertexCoupling(n=len(data.edges), m=m, theta=data.theta, q=q,
                          lam=scaling.lambda_prime, edges=data.edges)


def design_resonant_potential(n: int, m: int, lengths=None, well_shape: str = "square",
                              svd_tol: float = 1e-8) -> PotentialSpec:
    """Diagonal potential with a zero-energy resonance of order exactly ``m``.

    The first ``m + 1`` edges get full-length square wells of depth
    ``-(pi / (2 a_i))^2``, for which ``z = sin(pi x / (2 a_i))`` solves the
    half-problem ``z(0) = 0``, ``z'(a_i) = 0``; the remaining edges are free.
    """
    if well_shape != "square":
        raise ValueError(f"unsupported well shape {well_shape!r}")
    if not 1 <= m or m >= n:
        raise DomainError("order must be < n (and at least 1)")
    lengths = tuple(float(a) for a in (lengths if lengths is not None else [1.0] * n))
    if len(lengths) != n:
        raise DomainError(f"expected {n} lengths, got {len(lengths)}")
    depths = [-(np.pi / (2 * a)) ** 2 if i <= m else 0.0 for i, a in enumerate(lengths)]
    spec = PotentialSpec.diagonal_wells(depths, lengths)
    got = resonance_order(kirchhoff_defect_matrix(StarGraph(lengths), spec), svd_tol)
    if got != m:
        raise ConditioningError(f"designed potential has resonance order {got}, expected {m}")
    return spec


def edgewise_resonant_basis(graph: StarGraph, spec: PotentialSpec, tuned_edges, grid: Grid):
    """Resonant functions built edge-wise from half-problem solutions.

    For a diagonal potential whose half-problems (``z(0) = 0``, ``z'(a_i) = 0``)
    are solvable on ``tuned_edges = (e_1, ..., e_{m+1})``, returns samples of
    shape ``(len(grid.x), n, m)``: ``psi_i`` equals ``z'_{m+1}(0) z_i`` on edge
    ``e_i``, ``-z_i'(0) z_{m+1}`` on edge ``e_{m+1}`` and zero elsewhere.
    """
    if spec.kind != "diagonal":
        raise ValueError("explicit construction needs a diagonal potential")
    n = graph.n
    tuned = list(tuned_edges)
    z, dz0 = {}, {}
    for e in tuned:
        one = PotentialSpec.from_segments(
            [(x0, x1, v[e:e + 1, e:e + 1]) for x0, x1, v in spec.pieces()], n=1)
        a = graph.support_lengths[e]
        traj = solve_ivp(one, 1.0, 0.0, a, np.array([1.0, 0.0]), grid.x[::-1])[::-1]
        traj[grid.x > a] = traj[grid.index_of(a)]
        traj[grid.x > a, 1] = 0.0
        z[e] = traj[:, 0]
        dz0[e] = traj[0, 1]
    last = tuned[-1]
    psi = np.zeros((len(grid.x), n, len(tuned) - 1))
    for i, e in enumerate(tuned[:-1]):
        psi[:, e, i] = dz0[last] * z[e]
        psi[:, last, i] = -dz0[e] * z[last]
    return psi
