"""Resolvents of the scaled operator and of its limit, applied to test functions.

Every edge is cut at ``x = R``.  Beyond ``R`` the potential and the source
vanish, so the decaying solution is exactly ``y(R) exp(ik(x - R))`` with
``k = sqrt(zeta)``, ``Im k > 0``; the Robin condition ``y' = ik y`` at ``R``
is therefore exact and the tail contributes ``|y(R)|^2 / (2 Im k)`` to
squared ``L^2`` norms.  On ``[0, R]`` the solution is a particular solution
with zero vertex data plus a combination of ``n`` homogeneous solutions that
satisfy the vertex conditions, fixed by the ``n`` Robin conditions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .coupling import VertexCoupling, matching_matrix
from .errors import DomainError, RateFitError, SingularSystemError
from .model import PotentialSpec, ScalingLaw, StarGraph, evaluate_potential, evaluate_scaling
from .propagate import Grid, solve_driven, solve_ivp
from .scattering import kirchhoff_generators

__all__ = [
    "Source",
    "ScaledOperator",
    "ResolventSample",
    "default_battery",
    "resolvent_grid",
    "resolvent_apply",
    "resolvent_gap",
    "battery_gaps",
    "inner_product",
    "rate_fit",
]


@dataclass(frozen=True, eq=False)
class Source:
    """A test function on the star: a Gaussian or an indicator profile times per-edge weights.

    ``params`` is ``(center, width)`` for a Gaussian ``exp(-(x - c)^2 / (2 w^2))``
    and ``(x0, x1)`` for the indicator of ``[x0, x1)``.
    """

    kind: str
    params: tuple
    weights: tuple

    def __post_init__(self):
        if self.kind not in ("gaussian", "indicator"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        a, b = (float(p) for p in self.params)
        if self.kind == "indicator" and not 0 <= a < b:
            raise ValueError("indicator interval must satisfy 0 <= x0 < x1")
        if self.kind == "gaussian" and not b > 0:
            raise ValueError("gaussian width must be positive")
        object.__setattr__(self, "params", (a, b))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @property
    def n(self) -> int:
        return len(self.weights)

    @classmethod
    def gaussian(cls, center, width, weights):
        return cls("gaussian", (center, width), weights)

    @classmethod
    def indicator(cls, x0, x1, weights):
        return cls("indicator", (x0, x1), weights)

    def breakpoints(self) -> list:
        return list(self.params) if self.kind == "indicator" else []

    def support_end(self) -> float:
        """Point beyond which the source is below double precision relative to its peak."""
        a, b = self.params
        return b if self.kind == "indicator" else a + 9.0 * b

    def evaluate(self, x, ref=None) -> np.ndarray:
        """Samples of shape ``(len(x), n)``; indicator membership is decided at ``ref``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        a, b = self.params
        if self.kind == "gaussian":
            prof = np.exp(-0.5 * ((x - a) / b) ** 2)
        else:
            r = x if ref is None else np.full_like(x, ref)
            prof = ((r >= a) & (r < b)).astype(float)
        return prof[:, None] * np.asarray(self.weights)[None, :]

    def on_step(self, a, b) -> np.ndarray:
        mid = 0.5 * (a + b)
        return self.evaluate([a, mid, b], ref=mid)


def default_battery(n: int) -> list:
    """Eight fixed sources: Gaussians and indicators at varied offsets and edge weights."""
    ones = [1.0] * n
    alt = [(-1.0) ** i for i in range(n)]
    first = [1.0] + [0.0] * (n - 1)
    last = [0.0] * (n - 1) + [1.0]
    ramp = [float(i + 1) for i in range(n)]
    wave = [math.cos(1.0 + i) for i in range(n)]
    return [
        Source.gaussian(2.0, 0.3, ones),
        Source.gaussian(1.0, 0.25, alt),
        Source.gaussian(3.0, 0.5, first),
        Source.gaussian(0.6, 0.2, last),
        Source.gaussian(1.5, 0.4, wave),
        Source.indicator(1.0, 2.0, ones),
        Source.indicator(0.5, 1.5, first),
        Source.indicator(2.0, 4.0, ramp),
    ]


@dataclass(frozen=True, eq=False)
class ScaledOperator:
    """``-d^2/dx^2 + eps^-2 lambda(eps) Q(x / eps)`` with Kirchhoff conditions at the vertex."""

    spec: PotentialSpec
    scaling: ScalingLaw
    eps: float

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise DomainError(f"eps={self.eps} outside (0, 1]")

    def potential(self) -> PotentialSpec:
        lam = evaluate_scaling(self.scaling, self.eps)
        return self.spec.scaled(self.eps, lam / self.eps ** 2)


def _operator_data(n, operator):
    """Potential on the real line scale and the vertex subspace (columns of ``(u, u')``)."""
    if isinstance(operator, tuple):
        operator = ScaledOperator(*operator)
    if isinstance(operator, ScaledOperator):
        return operator.eps, operator.potential(), kirchhoff_generators(n)
    if isinstance(operator, VertexCoupling):
        if operator.n != n:
            raise DomainError("coupling and graph disagree on the number of edges")
        return 0.0, PotentialSpec.zero(n), scipy.linalg.null_space(matching_matrix(operator))
    raise TypeError("operator must be a VertexCoupling or (spec, scaling, eps)")


def _decay_root(zeta) -> complex:
    zeta = complex(zeta)
    if zeta.imag == 0:
        raise DomainError("zeta must have a nonzero imaginary part")
    k = np.sqrt(zeta)
    return -k if k.imag < 0 else k


def resolvent_grid(graph: StarGraph, spec: PotentialSpec, eps: float, sources, R: float,
                   core_density: float = 4000.0, outer_density: float = 200.0,
                   min_core_cells: int = 512, min_piece_cells: int = 8) -> Grid:
    """Grid on ``[0, R]`` through every scaled potential breakpoint and source jump.

    Pieces inside the scaled core ``[0, eps max a_i]`` are refined to at least
    ``core_density`` points per unit length and ``min_core_cells`` cells across
    the core; the rest uses ``outer_density``.
    """
    core_end = eps * graph.max_length
    bp = {0.0, float(R)}
    if eps > 0:
        bp.update(float(eps * x) for x in spec.breakpoints())
        bp.update(float(eps * a) for a in graph.support_lengths)
    for src in sources:
        bp.update(float(x) for x in src.breakpoints() if x < R)
    bp = np.array(sorted(bp))
    h_core = min(1.0 / core_density, core_end / min_core_cells) if core_end > 0 else None
    xs, knots, count = [np.array([0.0])], [0], 1
    for a, b in zip(bp[:-1], bp[1:]):
        h = h_core if h_core is not None and b <= core_end * (1 + 1e-12) else 1.0 / outer_density
        cells = max(min_piece_cells, 2 * math.ceil((b - a) / (2 * h)))
        xs.append(np.linspace(a, b, cells + 1)[1:])
        count += cells
        knots.append(count - 1)
    return Grid(np.concatenate(xs), tuple(knots))


@dataclass(frozen=True, eq=False)
class ResolventSample:
    """``y = (H - zeta)^-1 f`` sampled on a truncated grid, with its derivative."""

    eps: float
    zeta: complex
    k: complex
    source: Source
    grid: Grid
    potential: PotentialSpec
    y: np.ndarray
    dy: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def R(self) -> float:
        return float(self.grid.x[-1])

    def closure_defect(self) -> float:
        return float(np.abs(self.dy[-1] - 1j * self.k * self.y[-1]).max())

    def tail_norm2(self, values=None) -> float:
        v = self.y[-1] if values is None else values
        return float(np.sum(np.abs(v) ** 2) / (2.0 * self.k.imag))

    def l2_norm(self) -> float:
        core = self.grid.integrate(np.sum(np.abs(self.y) ** 2, axis=1))
        return math.sqrt(core + self.tail_norm2())

    def ode_residual(self) -> float:
        """Max of ``|-y'' + (V - zeta) y - f|`` over interior points.

        ``y''`` is the fourth-order central difference of the stored ``y'``;
        differencing ``y'`` once rather than ``y`` twice keeps round-off small
        on the fine grid inside a strongly squeezed core.
        """
        x, worst = self.grid.x, 0.0
        for i0, i1 in zip(self.grid.knots[:-1], self.grid.knots[1:]):
            if i1 - i0 < 4:
                continue
            mid = 0.5 * (x[i0] + x[i1])
            h = (x[i1] - x[i0]) / (i1 - i0)
            y = self.y[i0:i1 + 1]
            dy = self.dy[i0:i1 + 1]
            d2 = (-dy[4:] + 8 * dy[3:-1] - 8 * dy[1:-3] + dy[:-4]) / (12 * h)
            V = evaluate_potential(self.potential, mid)
            f = self.source.evaluate(x[i0 + 2:i1 - 1], ref=mid)
            res = -d2 + y[2:-2] @ V.T - self.zeta * y[2:-2] - f
            worst = max(worst, float(np.abs(res).max()))
        return worst


def source_norm(source: Source, grid: Grid) -> float:
    total = 0.0
    x = grid.x
    for i0, i1 in zip(grid.knots[:-1], grid.knots[1:]):
        f = source.evaluate(x[i0:i1 + 1], ref=0.5 * (x[i0] + x[i1]))
        total += Grid(x[i0:i1 + 1], (0, i1 - i0)).integrate(np.sum(f * f, axis=1))
    return math.sqrt(total)


class _Resolver:
    """Homogeneous solutions for one operator on one grid, reused across sources."""

    def __init__(self, graph, operator, zeta, grid, method="auto"):
        self.n = graph.n
        self.zeta = complex(zeta)
        self.k = _decay_root(zeta)
        self.grid = grid
        self.method = method
        self.eps, self.V, G = _operator_data(graph.n, operator)
        self.hom = solve_ivp(self.V, 1.0, self.zeta, 0.0, G.astype(complex), grid.x, method)
        n = self.n
        end = self.hom[-1]
        self.M = end[n:] - 1j * self.k * end[:n]
        cond = np.linalg.cond(self.M)
        if not np.isfinite(cond) or cond > 1e13:
            raise SingularSystemError(
                f"resolvent vertex system singular (cond={cond:.3e}); this should not happen"
                " for non-real zeta")

    def apply(self, source: Source) -> ResolventSample:
        n = self.n
        if source.n != n:
            raise DomainError("source and graph disagree on the number of edges")
        if source.support_end() > self.grid.x[-1]:
            raise DomainError("source must be supported inside [0, R)")
        part = solve_driven(self.V, 1.0, self.zeta, self.grid.x, source.on_step, self.method)
        r = part[-1, n:] - 1j * self.k * part[-1, :n]
        alpha = np.linalg.solve(self.M, -r)
        Y = np.einsum("xsj,j->xs", self.hom, alpha) + part
        return ResolventSample(self.eps, self.zeta, self.k, source, self.grid, self.V,
                               Y[:, :n].copy(), Y[:, n:].copy())


def resolvent_apply(graph: StarGraph, operator, zeta, source: Source, R: float,
                    grid_density: float = 4000.0, outer_density: float = 200.0,
                    grid: Grid | None = None) -> ResolventSample:
    """Apply ``(H - zeta)^-1`` to ``source`` on the star truncated at ``R``.

    ``operator`` is a :class:`VertexCoupling` (the limit operator, no
    potential) or a :class:`ScaledOperator` / ``(spec, scaling, eps)`` tuple.
    """
    _decay_root(zeta)
    if not R > graph.max_length:
        raise DomainError("truncation radius must exceed every support length")
    if grid is None:
        eps, V, _ = _operator_data(graph.n, operator)
        spec = operator.spec if isinstance(operator, ScaledOperator) else (
            operator[0] if isinstance(operator, tuple) else V)
        grid = resolvent_grid(graph, spec, eps, [source], R, grid_density, outer_density)
    return _Resolver(graph, operator, zeta, grid).apply(source)


def _gap(y_eps: ResolventSample, y_lim: ResolventSample) -> float:
    d = y_eps.y - y_lim.y
    core = y_eps.grid.integrate(np.sum(np.abs(d) ** 2, axis=1))
    return math.sqrt(core + y_eps.tail_norm2(d[-1])) / source_norm(y_eps.source, y_eps.grid)


def battery_gaps(graph: StarGraph, spec: PotentialSpec, scaling: ScalingLaw,
                 coupling: VertexCoupling, eps: float, zeta, sources, R: float,
                 grid_density: float = 4000.0, outer_density: float = 200.0) -> np.ndarray:
    """``||y_eps - y|| / ||f||`` for each source, sharing one grid and the homogeneous solves."""
    if not R > graph.max_length:
        raise DomainError("truncation radius must exceed every support length")
    grid = resolvent_grid(graph, spec, eps, sources, R, grid_density, outer_density)
    scaled = _Resolver(graph, ScaledOperator(spec, scaling, eps), zeta, grid)
    limit = _Resolver(graph, coupling, zeta, grid)
    return np.array([_gap(scaled.apply(f), limit.apply(f)) for f in sources])


def resolvent_gap(graph: StarGraph, spec: PotentialSpec, scaling: ScalingLaw,
                  coupling: VertexCoupling, eps: float, zeta, source: Source, R: float,
                  grid_density: float = 4000.0) -> float:
    """Relative ``L^2`` distance between the scaled and limit resolvents applied to ``source``."""
    return float(battery_gaps(graph, spec, scaling, coupling, eps, zeta, [source], R,
                              grid_density)[0])


def inner_product(u: ResolventSample, g: Source) -> complex:
    """``int conj(y) g`` over the truncated star (``g`` vanishes beyond ``R``)."""
    x, total = u.grid.x, 0.0
    for i0, i1 in zip(u.grid.knots[:-1], u.grid.knots[1:]):
        gv = g.evaluate(x[i0:i1 + 1], ref=0.5 * (x[i0] + x[i1]))
        total += Grid(x[i0:i1 + 1], (0, i1 - i0)).integrate(
            np.sum(np.conj(u.y[i0:i1 + 1]) * gv, axis=1))
    return complex(total)


def rate_fit(eps_list, gap_list, noise_floor: float = 1e-8):
    """Least-squares line through ``(log eps, log gap)``: returns ``(slope, intercept, rms residual)``."""
    eps = np.asarray(eps_list, dtype=float)
    gaps = np.asarray(gap_list, dtype=float)
    if eps.shape != gaps.shape or eps.size < 4:
        raise RateFitError("rate fit needs at least 4 (eps, gap) pairs")
    if np.any(gaps <= 10 * noise_floor):
        raise RateFitError("gaps at the discretisation noise floor; increase contrast or grid density")
    X, Yv = np.log(eps), np.log(gaps)
    slope, intercept = np.polyfit(X, Yv, 1)
    resid = Yv - (slope * X + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid ** 2)))
