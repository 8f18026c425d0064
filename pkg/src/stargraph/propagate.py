"""Propagation of ``-u'' + (lam Q(x) - E) u = 0`` as a first-order 2n system.

The state is ``Y = (u, u')``; it obeys ``Y' = C(x) Y`` with the companion
matrix ``C = [[0, I], [lam Q - E, 0]]``.  On constant pieces of ``Q`` the
propagator is the matrix exponential of ``C h`` (scaling and squaring, via
:func:`scipy.linalg.expm`).  Sampled potentials are integrated with
fixed-step classical RK4 which, for a linear autonomous system, is the
fourth-order Taylor polynomial of the exponential applied per step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg

from .errors import DomainError
from .model import PotentialSpec

__all__ = [
    "PropagatorMatrix",
    "Grid",
    "companion",
    "symplectic_form",
    "step_matrix",
    "transfer_matrix",
    "solve_ivp",
    "solve_driven",
    "make_grid",
]

RK4_MAX_STEP = 2e-3


def companion(V, E) -> np.ndarray:
    V = np.asarray(V)
    n = V.shape[0]
    dtype = np.result_type(V.dtype, type(E))
    C = np.zeros((2 * n, 2 * n), dtype=dtype)
    C[:n, n:] = np.eye(n)
    C[n:, :n] = V - E * np.eye(n)
    return C


def symplectic_form(n: int) -> np.ndarray:
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    return J


def _rk4_matrix(Ch):
    n2 = Ch.shape[0]
    out = np.eye(n2, dtype=Ch.dtype)
    term = np.eye(n2, dtype=Ch.dtype)
    for p in range(1, 5):
        term = term @ Ch / p
        out = out + term
    return out


def step_matrix(V, E, h, method="exact", max_step=RK4_MAX_STEP) -> np.ndarray:
    """Propagator over a signed length ``h`` on which ``V = lam Q`` is constant."""
    C = companion(V, E)
    if method == "exact":
        return scipy.linalg.expm(C * h)
    if method == "rk4":
        nsub = max(1, math.ceil(abs(h) / max_step))
        return np.linalg.matrix_power(_rk4_matrix(C * (h / nsub)), nsub)
    raise ValueError(f"unknown integration method {method!r}")


def _resolve_method(spec: PotentialSpec, method: str) -> str:
    if method == "auto":
        return "rk4" if spec.is_sampled else "exact"
    return method


class _Stepper:
    """Splits a path at the breakpoints of ``spec`` and caches step propagators."""

    def __init__(self, spec: PotentialSpec, lambda_eff, E, method):
        self.E = E
        self.method = _resolve_method(spec, method)
        pieces = spec.pieces()
        self.bounds = np.array([p[0] for p in pieces] + [spec.extent]) if pieces else np.array([0.0])
        self.values = [lambda_eff * p[2] for p in pieces]
        self.zero = np.zeros((spec.n, spec.n))
        self.cache = {}

    def _piece(self, x):
        # index of the piece containing the open interval starting at x
        k = int(np.searchsorted(self.bounds, x, side="right")) - 1
        return k if 0 <= k < len(self.values) else -1

    def matrix(self, x0, x1):
        """Propagator from ``x0`` to ``x1`` (either order)."""
        n2 = 2 * self.zero.shape[0]
        M = np.eye(n2, dtype=np.result_type(float, type(self.E)))
        if x0 == x1:
            return M
        lo, hi = min(x0, x1), max(x0, x1)
        inner = self.bounds[(self.bounds > lo) & (self.bounds < hi)]
        pts = np.concatenate([[lo], inner, [hi]])
        if x1 < x0:
            pts = pts[::-1]
        for a, b in zip(pts[:-1], pts[1:]):
            k = self._piece(min(a, b))
            h = b - a
            # uniform grids give step lengths that differ in the last bits
            key = (k, float(f"{h:.12e}"))
            S = self.cache.get(key)
            if S is None:
                V = self.values[k] if k >= 0 else self.zero
                S = step_matrix(V, self.E, h, self.method)
                self.cache[key] = S
            M = S @ M
        return M


@dataclass(frozen=True, eq=False)
class PropagatorMatrix:
    """Maps ``(u(x0), u'(x0))`` to ``(u(x1), u'(x1))``."""

    matrix: np.ndarray
    interval: tuple
    energy: complex
    lambda_eff: float

    def symplectic_defect(self) -> float:
        n = self.matrix.shape[0] // 2
        J = symplectic_form(n)
        return float(np.linalg.norm(self.matrix.T @ J @ self.matrix - J))


def transfer_matrix(spec: PotentialSpec, lambda_eff: float, E, x0: float, x1: float,
                    method: str = "auto") -> PropagatorMatrix:
    """Propagator of ``-u'' + (lambda_eff Q - E) u = 0`` from ``x0`` to ``x1``.

    ``x1 < x0`` is allowed and gives backward propagation (the inverse map).
    The potential is taken as zero beyond its support.
    """
    if x0 < 0 or x1 < 0:
        raise DomainError("propagation interval must lie in x >= 0")
    M = _Stepper(spec, lambda_eff, E, method).matrix(float(x0), float(x1))
    return PropagatorMatrix(M, (float(x0), float(x1)), E, float(lambda_eff))


def solve_ivp(spec: PotentialSpec, lambda_eff: float, E, x0: float, state0, x_grid,
              method: str = "auto") -> np.ndarray:
    """Sample the solution with initial state ``state0`` at ``x0`` on ``x_grid``.

    ``state0`` is a 2n vector or a ``(2n, p)`` block of initial states; the
    result has shape ``(len(x_grid), 2n)`` or ``(len(x_grid), 2n, p)``.  The
    grid must be monotone and start at or beyond ``x0`` in the direction of
    travel, which is inferred from the grid.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    if x_grid.size == 0:
        raise ValueError("empty grid")
    if x0 < 0 or np.any(x_grid < 0):
        raise DomainError("grid must lie in x >= 0")
    d = np.diff(x_grid)
    if not (np.all(d >= 0) or np.all(d <= 0)):
        raise ValueError("grid must be monotone")
    stepper = _Stepper(spec, lambda_eff, E, method)
    Y = np.asarray(state0)
    Y = Y.astype(np.result_type(Y.dtype, float, type(E)))
    out = np.empty((len(x_grid),) + Y.shape, dtype=Y.dtype)
    x = float(x0)
    for k, xk in enumerate(x_grid):
        Y = stepper.matrix(x, xk) @ Y
        out[k] = Y
        x = xk
    return out


def solve_driven(spec: PotentialSpec, lambda_eff: float, E, x_grid, source,
                 method: str = "auto") -> np.ndarray:
    """Particular solution of ``-u'' + (lambda_eff Q - E) u = f`` with zero data at ``x_grid[0]``.

    ``source(a, b)`` returns ``f`` at ``a``, ``(a + b) / 2`` and ``b`` as a
    ``(3, n)`` array, evaluated as the limit from inside ``[a, b]`` so that
    jumps of ``f`` at grid points are handled.  Each step applies the exact
    homogeneous propagator and adds the Duhamel integral by Simpson's rule,
    which is accurate to ``O(h^5)`` per step when ``Q`` is constant on it.
    Returns states of shape ``(len(x_grid), 2n)``.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    if np.any(np.diff(x_grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    n = spec.n
    stepper = _Stepper(spec, lambda_eff, E, method)
    out = np.zeros((len(x_grid), 2 * n), dtype=complex)
    Y = np.zeros(2 * n, dtype=complex)
    for j in range(len(x_grid) - 1):
        a, b = x_grid[j], x_grid[j + 1]
        mid = 0.5 * (a + b)
        fa, fm, fb = np.asarray(source(a, b))
        g = np.zeros((3, 2 * n), dtype=complex)
        g[:, n:] = -np.array([fa, fm, fb])
        P = stepper.matrix(a, b)
        Ph = stepper.matrix(mid, b)
        Y = P @ Y + (b - a) / 6.0 * (P @ g[0] + 4.0 * (Ph @ g[1]) + g[2])
        out[j + 1] = Y
    return out


@dataclass(frozen=True, eq=False)
class Grid:
    """Sample points, uniform between consecutive knots, an even number of cells per piece.

    ``knots`` holds indices into ``x`` where pieces start and end; integrals
    use composite Simpson on each piece.
    """

    x: np.ndarray
    knots: tuple

    def integrate(self, values, axis: int = 0):
        values = np.moveaxis(np.asarray(values), axis, 0)
        total = 0.0
        for i0, i1 in zip(self.knots[:-1], self.knots[1:]):
            total = total + scipy.integrate.simpson(values[i0:i1 + 1], x=self.x[i0:i1 + 1], axis=0)
        return total

    def index_of(self, x: float) -> int:
        i = int(np.argmin(np.abs(self.x - x)))
        if abs(self.x[i] - x) > 1e-12 * max(1.0, abs(x)):
            raise ValueError(f"{x} is not a grid point")
        return i


def make_grid(breakpoints, length: float, n_points: int = 2000, start: float = 0.0) -> Grid:
    """Grid on ``[start, length]`` containing every breakpoint, about ``n_points`` in total."""
    bp = np.asarray(breakpoints, dtype=float)
    bp = np.unique(np.concatenate([[start, length], bp[(bp > start) & (bp < length)]]))
    h = (length - start) / max(n_points - 1, 2)
    xs = [np.array([bp[0]])]
    knots = [0]
    count = 1
    for a, b in zip(bp[:-1], bp[1:]):
        cells = max(2, 2 * math.ceil((b - a) / (2 * h)))
        seg = np.linspace(a, b, cells + 1)[1:]
        xs.append(seg)
        count += cells
        knots.append(count - 1)
    return Grid(np.concatenate(xs), tuple(knots))
