"""Limit vertex couplings, their on-shell S-matrices and bound states.

A :class:`VertexCoupling` stores ``(theta, q, lambda)`` in the internal edge
order, where the ``m`` resonant edges come first; ``edges`` maps internal
positions back to original edge indices.  With ``M`` the resonant set and
``N`` its complement, the matching conditions read

    phi_j(0) - sum_{i in M} theta_ij phi_i(0) = 0,                      j in N,
    phi_i'(0) + sum_{j in N} theta_ij phi_j'(0) - lam sum_{j in M} q_ij phi_j(0) = 0,   i in M,

with derivatives taken away from the vertex.  S-matrices returned by this
module are in original edge order; row ``i`` is the incoming edge.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import SingularSystemError, ValidationError

__all__ = [
    "VertexCoupling",
    "SMatrix",
    "assemble_limit_system",
    "limit_smatrix",
    "limit_smatrix_cramer",
    "asymptotic_smatrix",
    "secular_matrix",
    "discrete_spectrum",
    "matching_matrix",
    "matching_defect",
]

COND_LIMIT = 1e13


@dataclass(frozen=True, eq=False)
class VertexCoupling:
    n: int
    m: int
    theta: np.ndarray
    q: np.ndarray
    lam: float = 0.0
    edges: tuple = field(default=None)

    def __post_init__(self):
        n, m = self.n, self.m
        if not 0 <= m <= n:
            raise ValidationError(f"resonance order m={m} outside [0, {n}]")
        theta = np.array(self.theta, dtype=float).reshape(m, n - m)
        q = np.array(self.q, dtype=float).reshape(m, m)
        if not np.allclose(q, q.T, rtol=1e-12, atol=1e-14):
            raise ValidationError("q must be symmetric")
        q = np.triu(q) + np.triu(q, 1).T
        edges = tuple(range(n)) if self.edges is None else tuple(int(e) for e in self.edges)
        if sorted(edges) != list(range(n)):
            raise ValidationError("edges must be a permutation of 0..n-1")
        theta.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "edges", edges)

    @property
    def scale_invariant(self) -> bool:
        return self.lam == 0 or not self.q.any()

    @classmethod
    def kirchhoff(cls, n: int) -> "VertexCoupling":
        return cls(n, 1, np.ones((1, n - 1)), np.zeros((1, 1)))

    @classmethod
    def dirichlet(cls, n: int) -> "VertexCoupling":
        return cls(n, 0, np.zeros((0, n)), np.zeros((0, 0)))

    @classmethod
    def delta(cls, n: int, qbar: float, lam: float = 1.0) -> "VertexCoupling":
        """``m = 1`` coupling with all ``theta = 1``: a delta interaction of strength ``lam * qbar``."""
        return cls(n, 1, np.ones((1, n - 1)), [[qbar]], lam)

    def to_original(self, S_internal) -> np.ndarray:
        """Relabel an ``n x n`` matrix from internal to original edge order."""
        S = np.empty_like(S_internal)
        e = np.array(self.edges)
        S[np.ix_(e, e)] = S_internal
        return S


@dataclass(frozen=True, eq=False)
class SMatrix:
    """On-shell scattering matrix; ``entries[i, j]`` is the amplitude from edge ``i`` into ``j``."""

    k: float
    entries: np.ndarray

    def unitarity_defect(self) -> float:
        S = self.entries
        return float(np.linalg.norm(S.conj().T @ S - np.eye(len(S)), 2))


def assemble_limit_system(coupling: VertexCoupling, k: float):
    """Matrix ``A`` and right-hand sides (as columns) of the amplitude system, internal order.

    Column ``i`` of the returned ``rhs`` is the right-hand side whose solution
    ``(T_i1, ..., T_in)`` is the scattering row for a wave incoming on edge ``i``.
    """
    n, m = coupling.n, coupling.m
    lam, q, th = coupling.lam, coupling.q, coupling.theta
    ik = 1j * k
    A = np.zeros((n, n), dtype=complex)
    rhs = np.zeros((n, n), dtype=complex)
    if m == 0:
        return np.eye(n, dtype=complex), -np.eye(n, dtype=complex)
    A[:m, :m] = ik * np.eye(m) - lam * q
    A[:m, m:] = ik * th
    A[m:, :m] = -th.T
    A[m:, m:] = np.eye(n - m)
    rhs[:m, :m] = lam * q + ik * np.eye(m)
    rhs[m:, :m] = th.T
    rhs[:m, m:] = ik * th
    rhs[m:, m:] = -np.eye(n - m)
    return A, rhs


def _solve_rows(A, rhs, what):
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularSystemError(
            f"{what} is numerically singular (cond={cond:.3e}, det={np.linalg.det(A):.3e});"
            " possible threshold anomaly")
    return scipy.linalg.lu_solve(scipy.linalg.lu_factor(A), rhs).T


def limit_smatrix(coupling: VertexCoupling, k: float) -> SMatrix:
    if not k > 0:
        raise ValueError("momentum k must be positive")
    A, rhs = assemble_limit_system(coupling, k)
    S = _solve_rows(A, rhs, "limit amplitude system")
    return SMatrix(float(k), coupling.to_original(S))


def limit_smatrix_cramer(coupling: VertexCoupling, k: float) -> SMatrix:
    """Same as :func:`limit_smatrix` via explicit determinant ratios (small ``n`` only)."""
    A, rhs = assemble_limit_system(coupling, k)
    n = coupling.n
    detA = np.linalg.det(A)
    S = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            Aij = A.copy()
            Aij[:, j] = rhs[:, i]
            S[i, j] = np.linalg.det(Aij) / detA
    return SMatrix(float(k), coupling.to_original(S))


def asymptotic_smatrix(coupling: VertexCoupling) -> SMatrix:
    """The energy-independent S-matrix of the scale-invariant part (``lam`` dropped).

    This is the ``k -> infinity`` limit of :func:`limit_smatrix` and equals it
    for every ``k`` when the coupling is scale invariant.
    """
    n, m, th = coupling.n, coupling.m, coupling.theta
    C = np.eye(n)
    C[:m, m:] = th
    C[m:, :m] = -th.T
    c = np.zeros((n, n))
    c[:m, :m] = np.eye(m)
    c[:m, m:] = th
    c[m:, :m] = th.T
    c[m:, m:] = -np.eye(n - m)
    if abs(np.linalg.det(C)) < 1e-12:
        raise SingularSystemError("scale-invariant matrix is singular (internal inconsistency)")
    S = np.linalg.solve(C, c).T
    return SMatrix(float("inf"), coupling.to_original(S.astype(complex)))


def secular_matrix(coupling: VertexCoupling, kappa: float) -> np.ndarray:
    """Real matrix of the matching conditions for the decaying ansatz ``c_j exp(-kappa x)``."""
    n, m = coupling.n, coupling.m
    M = np.zeros((n, n))
    M[:m, :m] = -kappa * np.eye(m) - coupling.lam * coupling.q
    M[:m, m:] = -kappa * coupling.theta
    M[m:, :m] = -coupling.theta.T
    M[m:, m:] = np.eye(n - m)
    return M


def _scan_grid(kappa_max, n_scan):
    # a linear scan plus a geometric one: roots of weak couplings crowd near zero
    lin = np.linspace(kappa_max / n_scan, kappa_max, n_scan)
    return np.union1d(lin, np.geomspace(kappa_max * 1e-12, kappa_max, 1000))


def discrete_spectrum(coupling: VertexCoupling, root_tol: float = 1e-12,
                      n_scan: int = 10_000, kappa_max: float | None = None) -> list:
    """Negative eigenvalues ``-kappa^2`` of the limit operator, ascending.

    Roots of ``det secular_matrix(kappa)`` are bracketed by a sign scan over
    ``(0, kappa_max]`` and refined by bisection.  A root found by a sign change
    is listed as many times as the kernel dimension of the secular matrix.
    Tangential (even-order) zeros do not change sign; a near-zero local
    minimum of ``|det|`` triggers a warning instead.
    """
    if coupling.m == 0 or coupling.scale_invariant:
        return []
    qnorm = np.linalg.norm(coupling.q, 2)
    if kappa_max is None:
        kappa_max = 10.0 * (1.0 + abs(coupling.lam) * qnorm)

    def f(kappa):
        return np.linalg.det(secular_matrix(coupling, kappa))

    # the secular matrix is affine in kappa, so the scan is one batched determinant
    M0 = secular_matrix(coupling, 0.0)
    M1 = secular_matrix(coupling, 1.0) - M0
    for _ in range(6):
        grid = _scan_grid(kappa_max, n_scan)
        vals = np.linalg.det(M0[None] + grid[:, None, None] * M1[None])
        if abs(vals[-1]) > 1e-12 * np.abs(vals).max() and np.sign(vals[-1]) == np.sign(vals[-2]):
            break
        warnings.warn(f"secular determinant small at scan boundary kappa={kappa_max:g}; enlarging")
        kappa_max *= 2.0
    sign = np.sign(vals)
    roots = list(grid[sign == 0])
    for a in np.flatnonzero(sign[:-1] * sign[1:] < 0):
        roots.append(scipy.optimize.bisect(f, grid[a], grid[a + 1], xtol=root_tol, maxiter=500))
    kappas = []
    for root in roots:
        s = np.linalg.svd(secular_matrix(coupling, root), compute_uv=False)
        mult = max(1, int(np.sum(s <= 1e-6 * s.max())))
        kappas.extend([root] * mult)
    absv = np.abs(vals)
    scale = absv.max()
    for a in range(1, len(grid) - 1):
        if (absv[a] < absv[a - 1] and absv[a] < absv[a + 1] and sign[a - 1] == sign[a + 1]
                and sign[a] == sign[a - 1] and absv[a] < 1e-8 * scale):
            warnings.warn(f"possible even-order root of the secular determinant near kappa={grid[a]:g}")
    return sorted(-k * k for k in kappas)


def matching_matrix(coupling: VertexCoupling) -> np.ndarray:
    """``B`` (n x 2n) with ``B @ (values, derivatives) =`` the matching defects.

    Boundary data are in original edge order; rows are the value conditions
    for the non-resonant edges followed by the derivative conditions for the
    resonant ones.
    """
    n, m = coupling.n, coupling.m
    B_int = np.zeros((n, 2 * n))
    B_int[: n - m, m:n] = np.eye(n - m)
    B_int[: n - m, :m] = -coupling.theta.T
    B_int[n - m:, n:n + m] = np.eye(m)
    B_int[n - m:, n + m:] = coupling.theta
    B_int[n - m:, :m] = -coupling.lam * coupling.q
    e = np.array(coupling.edges)
    B = np.zeros_like(B_int)
    B[:, e] = B_int[:, :n]
    B[:, n + e] = B_int[:, n:]
    return B


def matching_defect(coupling: VertexCoupling, values, derivatives) -> np.ndarray:
    data = np.concatenate([np.asarray(values), np.asarray(derivatives)])
    return matching_matrix(coupling) @ data
