"""Domain types: star graphs, compactly supported matrix potentials, scaling laws.

Edges are indexed ``0 .. n-1`` and every edge is parametrised by the distance
``x`` from the central vertex.  A potential is an ``n x n`` real symmetric
matrix function of ``x``; entry ``(i, j)`` couples edges ``i`` and ``j`` at equal
distance from the vertex.

Potentials are piecewise constant.  They are given either as a list of
segments ``(x_start, x_end, matrix)`` whose values add up where segments
overlap, or as a uniform grid of samples over ``[0, span]`` (each sample
covering one cell).  Evaluation uses half-open intervals ``[x_start, x_end)``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import jsonschema
import numpy as np

from .errors import ConfigSchemaError, DomainError, ValidationError

__all__ = [
    "StarGraph",
    "PotentialSpec",
    "ScalingLaw",
    "Tolerances",
    "ExperimentConfig",
    "evaluate_potential",
    "evaluate_scaling",
    "validate_potential",
    "load_config",
    "config_from_dict",
    "config_to_dict",
    "config_hash",
    "CONFIG_SCHEMA",
]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StarGraph:
    """``n`` half-lines joined at one vertex; ``support_lengths[i]`` is ``a_i``."""

    support_lengths: tuple

    def __post_init__(self):
        a = tuple(float(v) for v in self.support_lengths)
        if len(a) < 1:
            raise ValidationError("a star graph needs at least one edge")
        if not all(math.isfinite(v) and v > 0 for v in a):
            raise ValidationError("support_lengths must be positive")
        object.__setattr__(self, "support_lengths", a)

    @property
    def n(self) -> int:
        return len(self.support_lengths)

    @property
    def max_length(self) -> float:
        return max(self.support_lengths)

    @classmethod
    def uniform(cls, n: int, length: float = 1.0) -> "StarGraph":
        return cls((length,) * n)

    def permuted(self, perm) -> "StarGraph":
        return StarGraph(tuple(self.support_lengths[p] for p in perm))


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Piecewise-constant real symmetric ``n x n`` potential ``Q(x)``.

    Use the constructors :meth:`zero`, :meth:`from_segments`,
    :meth:`from_samples` and :meth:`diagonal_wells` rather than building the
    dataclass by hand.
    """

    n: int
    kind: str = "diagonal"
    segments: tuple = ()
    samples: np.ndarray | None = None
    span: float = 0.0

    def __post_init__(self):
        if self.kind not in ("diagonal", "matrix"):
            raise ValidationError(f"unknown potential kind {self.kind!r}")
        if self.n < 1:
            raise ValidationError("potential dimension must be positive")
        segs = []
        for x0, x1, value in self.segments:
            x0, x1 = float(x0), float(x1)
            value = _frozen(value)
            if value.shape != (self.n, self.n):
                raise ValidationError(
                    f"segment matrix has shape {value.shape}, expected {(self.n, self.n)}")
            if not (0.0 <= x0 < x1):
                raise ValidationError("segments need 0 <= x_start < x_end")
            self._check_matrix(value)
            segs.append((x0, x1, value))
        object.__setattr__(self, "segments", tuple(segs))
        if self.samples is not None:
            samples = _frozen(self.samples)
            if samples.ndim != 3 or samples.shape[1:] != (self.n, self.n) or len(samples) == 0:
                raise ValidationError("samples must have shape (N, n, n) with N >= 1")
            if not self.span > 0:
                raise ValidationError("sampled potential needs a positive span")
            for value in samples:
                self._check_matrix(value)
            object.__setattr__(self, "samples", samples)

    def _check_matrix(self, value):
        if not np.all(np.isfinite(value)):
            raise ValidationError("potential values must be finite")
        if not np.array_equal(value, value.T):
            raise ValidationError("potential must be symmetric")
        if self.kind == "diagonal" and np.any(value[~np.eye(self.n, dtype=bool)] != 0):
            raise ValidationError("diagonal potential has nonzero off-diagonal entries")

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> "PotentialSpec":
        return cls(n=n, kind="diagonal")

    @classmethod
    def from_segments(cls, segments, n: int | None = None, kind: str | None = None):
        segments = [(x0, x1, np.asarray(v, dtype=float)) for x0, x1, v in segments]
        if n is None:
            if not segments:
                raise ValidationError("cannot infer n from an empty segment list")
            n = segments[0][2].shape[0]
        if kind is None:
            offdiag = any(np.any(v[~np.eye(n, dtype=bool)] != 0) for _, _, v in segments)
            kind = "matrix" if offdiag else "diagonal"
        return cls(n=n, kind=kind, segments=tuple(segments))

    @classmethod
    def from_samples(cls, samples, span: float, kind: str | None = None):
        samples = np.asarray(samples, dtype=float)
        n = samples.shape[1]
        if kind is None:
            offdiag = np.any(samples[:, ~np.eye(n, dtype=bool)] != 0)
            kind = "matrix" if offdiag else "diagonal"
        return cls(n=n, kind=kind, samples=samples, span=float(span))

    @classmethod
    def diagonal_wells(cls, depths: Sequence[float], lengths: Sequence[float]):
        """Square wells ``Q_ii = depths[i]`` on ``[0, lengths[i])``; zero depths are skipped."""
        n = len(depths)
        segs = []
        for i, (d, a) in enumerate(zip(depths, lengths)):
            if d != 0:
                v = np.zeros((n, n))
                v[i, i] = d
                segs.append((0.0, a, v))
        return cls(n=n, kind="diagonal", segments=tuple(segs))

    # -- structure ----------------------------------------------------------

    @property
    def is_sampled(self) -> bool:
        return self.samples is not None

    @property
    def extent(self) -> float:
        """Right end of the support (0 for the zero potential)."""
        if self.is_sampled:
            return self.span
        return max((x1 for _, x1, _ in self.segments), default=0.0)

    def breakpoints(self) -> np.ndarray:
        if self.is_sampled:
            return np.linspace(0.0, self.span, len(self.samples) + 1)
        pts = {0.0}
        for x0, x1, _ in self.segments:
            pts.update((x0, x1))
        return np.array(sorted(pts))

    def pieces(self):
        """Non-overlapping ``(x0, x1, value)`` triples covering ``[0, extent]``."""
        if self.is_sampled:
            edges = self.breakpoints()
            return [(edges[k], edges[k + 1], self.samples[k]) for k in range(len(self.samples))]
        bp = self.breakpoints()
        out = []
        for x0, x1 in zip(bp[:-1], bp[1:]):
            out.append((x0, x1, evaluate_potential(self, 0.5 * (x0 + x1))))
        return out

    def support_end(self, i: int, j: int) -> float:
        """Largest ``x`` at which entry ``(i, j)`` is nonzero (0 if it never is)."""
        end = 0.0
        for x0, x1, v in self.pieces():
            if v[i, j] != 0:
                end = max(end, x1)
        return end

    def permuted(self, perm) -> "PotentialSpec":
        """Relabel edges so that new edge ``a`` is old edge ``perm[a]``."""
        perm = np.asarray(perm)
        ix = np.ix_(perm, perm)
        if self.is_sampled:
            return PotentialSpec(self.n, self.kind, samples=self.samples[:, perm][:, :, perm],
                                 span=self.span)
        segs = tuple((x0, x1, v[ix]) for x0, x1, v in self.segments)
        return PotentialSpec(self.n, self.kind, segments=segs)

    def rotated(self, rotation) -> "PotentialSpec":
        """Return ``R Q(x) R^T``; the result is symmetrised bitwise."""
        R = np.asarray(rotation, dtype=float)

        def rot(v):
            w = R @ v @ R.T
            return np.triu(w) + np.triu(w, 1).T

        if self.is_sampled:
            return PotentialSpec(self.n, "matrix", samples=np.array([rot(v) for v in self.samples]),
                                 span=self.span)
        return PotentialSpec(self.n, "matrix",
                             segments=tuple((x0, x1, rot(v)) for x0, x1, v in self.segments))

    def scaled(self, eps: float, factor: float = 1.0) -> "PotentialSpec":
        """Return ``x -> factor * Q(x / eps)``, the potential squeezed into ``[0, eps * extent]``."""
        if self.is_sampled:
            return PotentialSpec(self.n, self.kind, samples=factor * self.samples,
                                 span=eps * self.span)
        return PotentialSpec(self.n, self.kind, segments=tuple(
            (eps * x0, eps * x1, factor * v) for x0, x1, v in self.segments))

    def to_dict(self) -> dict:
        if self.is_sampled:
            return {"kind": self.kind, "samples": self.samples.tolist(), "span": self.span}
        return {"kind": self.kind,
                "segments": [[x0, x1, v.tolist()] for x0, x1, v in self.segments]}


def evaluate_potential(spec: PotentialSpec, x: float) -> np.ndarray:
    """Value ``Q(x)`` (segments are half-open, ``[x_start, x_end)``)."""
    if not x >= 0:
        raise DomainError(f"potential evaluated at negative x={x}")
    if spec.is_sampled:
        out = np.zeros((spec.n, spec.n))
        if x < spec.span:
            k = min(int(x / spec.span * len(spec.samples)), len(spec.samples) - 1)
            out[...] = spec.samples[k]
        return out
    out = np.zeros((spec.n, spec.n))
    for x0, x1, v in spec.segments:
        if x0 <= x < x1:
            out += v
    # sums of symmetric matrices can lose bit symmetry
    return np.triu(out) + np.triu(out, 1).T


def validate_potential(graph: StarGraph, spec: PotentialSpec) -> None:
    """Check that ``spec`` fits ``graph``: matching dimension and support inside the core."""
    if spec.n != graph.n:
        raise ValidationError(f"potential is {spec.n}x{spec.n} but graph has {graph.n} edges")
    a = graph.support_lengths
    tol = 1e-12 * graph.max_length
    for i in range(graph.n):
        for j in range(i, graph.n):
            if spec.support_end(i, j) > min(a[i], a[j]) + tol:
                raise ValidationError(
                    f"potential entry ({i},{j}) must vanish beyond min(a_{i}, a_{j})"
                    f" = {min(a[i], a[j])}")


@dataclass(frozen=True)
class ScalingLaw:
    """Coupling law ``lambda(eps) = 1 + c1 eps + c2 eps^2 + ...``."""

    coefficients: tuple = (1.0,)

    def __post_init__(self):
        c = tuple(float(v) for v in self.coefficients)
        if not c or c[0] != 1.0:
            raise ValidationError("scaling law must satisfy lambda(0) = 1")
        object.__setattr__(self, "coefficients", c)

    @property
    def lambda_prime(self) -> float:
        """The derivative ``lambda'(0)``, which is all the limit coupling retains."""
        return self.coefficients[1] if len(self.coefficients) > 1 else 0.0


def evaluate_scaling(law: ScalingLaw, eps: float) -> float:
    if not 0.0 <= eps <= 1.0:
        raise DomainError(f"eps={eps} outside [0, 1]")
    return float(np.polynomial.polynomial.polyval(eps, law.coefficients))


@dataclass(frozen=True)
class Tolerances:
    svd_tol: float = 1e-8
    ode_tol: float = 1e-10
    root_tol: float = 1e-12


def _default_eps_grid():
    return tuple(2.0 ** -p for p in range(1, 9))


@dataclass(frozen=True)
class ExperimentConfig:
    graph: StarGraph
    potential: PotentialSpec
    scaling: ScalingLaw = ScalingLaw()
    k_grid: tuple = (1.0,)
    eps_grid: tuple = field(default_factory=_default_eps_grid)
    zeta: complex = 1j
    truncation_radius: float = 10.0
    tolerances: Tolerances = Tolerances()

    def __post_init__(self):
        validate_potential(self.graph, self.potential)
        k = tuple(float(v) for v in self.k_grid)
        if not all(v > 0 for v in k):
            raise ValidationError("k_grid values must be positive")
        eps = tuple(float(v) for v in self.eps_grid)
        if not all(0 < v <= 1 for v in eps):
            raise ValidationError("eps_grid values must lie in (0, 1]")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValidationError("eps_grid must be strictly decreasing")
        if complex(self.zeta).imag == 0:
            raise ValidationError("zeta must have nonzero imaginary part")
        if not self.truncation_radius > self.graph.max_length:
            raise ValidationError("truncation_radius must exceed max support length")
        object.__setattr__(self, "k_grid", k)
        object.__setattr__(self, "eps_grid", eps)
        object.__setattr__(self, "zeta", complex(self.zeta))
        object.__setattr__(self, "truncation_radius", float(self.truncation_radius))


_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["n", "support_lengths", "potential"],
    "additionalProperties": False,
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "support_lengths": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "potential": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["diagonal", "matrix"]},
                "segments": {
                    "type": "array",
                    "items": {"type": "array", "prefixItems": [
                        {"type": "number"}, {"type": "number"}, _matrix],
                        "minItems": 3, "maxItems": 3},
                },
                "samples": {"type": "array", "items": _matrix, "minItems": 1},
                "span": {"type": "number"},
            },
        },
        "scaling_coefficients": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "k_grid": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "eps_grid": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "zeta": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "truncation_radius": {"type": "number"},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "number", "exclusiveMinimum": 0}
                           for k in ("svd_tol", "ode_tol", "root_tol")},
        },
    },
}


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Validate a parsed JSON document and build the config."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigSchemaError(err.message, ".".join(str(p) for p in err.absolute_path))
    graph = StarGraph(tuple(doc["support_lengths"]))
    if graph.n != doc["n"]:
        raise ValidationError(f"n={doc['n']} but {graph.n} support lengths given")
    pot = doc["potential"]
    if "samples" in pot:
        potential = PotentialSpec(doc["n"], pot["kind"], samples=np.array(pot["samples"], float),
                                  span=float(pot.get("span", graph.max_length)))
    else:
        potential = PotentialSpec(doc["n"], pot["kind"], segments=tuple(
            (x0, x1, np.array(v, float)) for x0, x1, v in pot.get("segments", [])))
    kwargs = {}
    if "scaling_coefficients" in doc:
        kwargs["scaling"] = ScalingLaw(tuple(doc["scaling_coefficients"]))
    if "k_grid" in doc:
        kwargs["k_grid"] = tuple(doc["k_grid"])
    if "eps_grid" in doc:
        kwargs["eps_grid"] = tuple(doc["eps_grid"])
    if "zeta" in doc:
        kwargs["zeta"] = complex(*doc["zeta"])
    kwargs["truncation_radius"] = doc.get("truncation_radius", 10.0 * graph.max_length)
    if "tolerances" in doc:
        kwargs["tolerances"] = Tolerances(**doc["tolerances"])
    return ExperimentConfig(graph=graph, potential=potential, **kwargs)


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigSchemaError(f"invalid JSON: {exc}") from exc
    return config_from_dict(doc)


def config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "n": config.graph.n,
        "support_lengths": list(config.graph.support_lengths),
        "potential": config.potential.to_dict(),
        "scaling_coefficients": list(config.scaling.coefficients),
        "k_grid": list(config.k_grid),
        "eps_grid": list(config.eps_grid),
        "zeta": [config.zeta.real, config.zeta.imag],
        "truncation_radius": config.truncation_radius,
        "tolerances": {"svd_tol": config.tolerances.svd_tol,
                       "ode_tol": config.tolerances.ode_tol,
                       "root_tol": config.tolerances.root_tol},
    }


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form (key order does not matter)."""
    canon = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
