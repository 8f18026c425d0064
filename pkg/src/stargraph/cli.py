"""Command-line front end: ``stargraph <subcommand> [--config PATH] [--out DIR] ...``.

Tabular results are CSV (header row, ``.`` decimal, 17 significant digits),
structured ones JSON.  Without ``--out`` the main output goes to stdout;
with it, files named after the subcommand are written together with a
``<subcommand>.report.json`` summary.  ``STARGRAPH_WORKERS`` sets the number
of worker processes for (eps, k) sweeps (default: all cores); output order
never depends on it.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coupling import discrete_spectrum, limit_smatrix
from .errors import StarGraphError, ValidationError
from .model import ExperimentConfig, config_hash, load_config
from .resolvent import battery_gaps, default_battery, rate_fit
from .resonance import coupling_data, design_resonant_potential, resonant_basis
from .scattering import eps_smatrix

__all__ = ["ExperimentReport", "emit_csv", "run_experiment", "main", "SUBCOMMANDS"]

SUBCOMMANDS = ("resonance", "design", "limit-smatrix", "eps-smatrix", "converge", "spectrum",
               "resolvent-rate")
WORKERS_ENV = "STARGRAPH_WORKERS"
UNITARITY_TOL = 1e-8

_PROVENANCE = {"model": "graph-model", "propagate": "ode-engine", "resonance": "resonance",
               "coupling": "limit-coupling", "scattering": "eps-scattering",
               "resolvent": "resolvent-lab", "cli": "cli-harness"}


@dataclass
class ExperimentReport:
    experiment: str
    config_hash: str | None
    records: list
    outputs: dict = field(default_factory=dict)
    timing: float = 0.0

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "config_hash": self.config_hash,
                "n_records": len(self.records), "outputs": sorted(self.outputs),
                "timing_seconds": self.timing}


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def csv_text(records, columns=None) -> str:
    """CSV text for a list of dicts; ``columns`` fixes the header (needed when empty)."""
    if columns is None:
        if not records:
            raise ValueError("columns are required for an empty record list")
        columns = list(records[0])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for rec in records:
        w.writerow([_fmt(rec[c]) for c in columns])
    return buf.getvalue()


def emit_csv(records, path, columns=None) -> Path:
    path = Path(path)
    path.write_text(csv_text(records, columns), encoding="utf-8")
    return path


def smatrix_record(eps, k, S) -> dict:
    """One wide row: ``eps, k`` then ``ReT_i_j, ImT_i_j`` for every entry (``2 + 2 n^2`` columns)."""
    rec = {"eps": float(eps), "k": float(k)}
    for (i, j), v in np.ndenumerate(np.asarray(S)):
        rec[f"ReT_{i}_{j}"] = float(v.real)
        rec[f"ImT_{i}_{j}"] = float(v.imag)
    return rec


def _long_rows(S, **keys):
    return [dict(keys, i=i, j=j, ReT=float(v.real), ImT=float(v.imag))
            for (i, j), v in np.ndenumerate(np.asarray(S))]


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValidationError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def _pmap(func, tasks):
    workers = min(_workers(), len(tasks))
    if workers <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks))


def _eps_task(task):
    graph, spec, scaling, eps, k = task
    return eps_smatrix(graph, spec, scaling, eps, k).entries


def _check_unitary(S, label):
    d = float(np.linalg.norm(S.conj().T @ S - np.eye(len(S)), 2))
    if d > UNITARITY_TOL:
        raise ValidationError(f"unitarity violated for {label}: ||S*S - I|| = {d:.3e}")


def _sweep_keys(config, flags):
    eps = flags.get("eps") or config.eps_grid
    ks = flags.get("k") or config.k_grid
    # descending eps (coarse to fine), ascending k
    return sorted({(float(e), float(k)) for e in eps for k in ks}, key=lambda t: (-t[0], t[1]))


def _limit_coupling(config):
    data = resonant_basis(config.graph, config.potential, config.tolerances.svd_tol)
    return data, coupling_data(data, config.potential, config.scaling)


def _run_resonance(config, flags):
    data, cp = _limit_coupling(config)
    doc = {"m": data.order_m, "resonant_edges": list(data.resonant_edges),
           "edges": list(data.edges), "theta": cp.theta.tolist(), "q": cp.q.tolist(),
           "lambda_prime": cp.lam, "singular_values": data.singular_values.tolist()}
    return [doc], {"resonance.json": json.dumps(doc, indent=2) + "\n"}


def _run_design(config, flags):
    n, m = flags.get("n"), flags.get("m")
    if n is None or m is None:
        raise ValidationError("design needs --n and --m")
    spec = design_resonant_potential(n, m, flags.get("lengths"))
    depths = np.zeros(n)
    for _, _, v in spec.segments:
        depths += np.diag(v)
    doc = dict(spec.to_dict(), n=n, m=m, depths=depths.tolist())
    return [doc], {"design.json": json.dumps(doc, indent=2) + "\n"}


def _run_limit_smatrix(config, flags):
    _, cp = _limit_coupling(config)
    rows = []
    for k in sorted(flags.get("k") or config.k_grid):
        S = limit_smatrix(cp, k).entries
        _check_unitary(S, f"k={k}")
        rows += _long_rows(S, k=k)
    return rows, {"limit-smatrix.csv": csv_text(rows, ["k", "i", "j", "ReT", "ImT"])}


def _run_spectrum(config, flags):
    _, cp = _limit_coupling(config)
    eig = [float(e) for e in discrete_spectrum(cp, config.tolerances.root_tol)]
    return [{"eigenvalues": eig}], {"spectrum.json": json.dumps(eig) + "\n"}


def _eps_sweep(config, flags):
    keys = _sweep_keys(config, flags)
    tasks = [(config.graph, config.potential, config.scaling, e, k) for e, k in keys]
    mats = _pmap(_eps_task, tasks)
    for (e, k), S in zip(keys, mats):
        _check_unitary(S, f"eps={e}, k={k}")
    return keys, mats


def _run_eps_smatrix(config, flags):
    keys, mats = _eps_sweep(config, flags)
    if flags.get("wide"):
        rows = [smatrix_record(e, k, S) for (e, k), S in zip(keys, mats)]
        n = config.graph.n
        cols = ["eps", "k"] + [f"{p}T_{i}_{j}" for i in range(n) for j in range(n)
                               for p in ("Re", "Im")]
    else:
        rows = [r for (e, k), S in zip(keys, mats) for r in _long_rows(S, eps=e, k=k)]
        cols = ["eps", "k", "i", "j", "ReT", "ImT"]
    return rows, {"eps-smatrix.csv": csv_text(rows, cols)}


def _run_converge(config, flags):
    _, cp = _limit_coupling(config)
    keys, mats = _eps_sweep(config, flags)
    limits = {k: limit_smatrix(cp, k).entries for k in {k for _, k in keys}}
    rows = [{"eps": e, "k": k, "gap": float(np.linalg.norm(S - limits[k], 2))}
            for (e, k), S in zip(keys, mats)]
    return rows, {"converge.csv": csv_text(rows, ["eps", "k", "gap"])}


def _gap_task(task):
    graph, spec, scaling, cp, eps, zeta, R = task
    return float(battery_gaps(graph, spec, scaling, cp, eps, zeta, default_battery(graph.n),
                              R).max())


def _run_resolvent_rate(config, flags):
    _, cp = _limit_coupling(config)
    zeta = flags.get("zeta") or config.zeta
    eps = sorted({float(e) for e in (flags.get("eps") or config.eps_grid)}, reverse=True)
    tasks = [(config.graph, config.potential, config.scaling, cp, e, zeta,
              config.truncation_radius) for e in eps]
    gaps = _pmap(_gap_task, tasks)
    rows = [{"eps": e, "gap": g, "gap_over_sqrt_eps": g / math.sqrt(e)} for e, g in zip(eps, gaps)]
    summary = {"zeta": [zeta.real, zeta.imag], "n_sources": len(default_battery(config.graph.n)),
               "max_gap_over_sqrt_eps": max(r["gap_over_sqrt_eps"] for r in rows)}
    if len(rows) >= 4:
        slope, intercept, resid = rate_fit(eps, gaps)
        summary.update(slope=slope, intercept=intercept, residual=resid)
    return rows, {"resolvent-rate.csv": csv_text(rows, ["eps", "gap", "gap_over_sqrt_eps"]),
                  "resolvent-rate.json": json.dumps(summary, indent=2, sort_keys=True) + "\n"}


_RUNNERS = {"resonance": _run_resonance, "design": _run_design,
            "limit-smatrix": _run_limit_smatrix, "eps-smatrix": _run_eps_smatrix,
            "converge": _run_converge, "spectrum": _run_spectrum,
            "resolvent-rate": _run_resolvent_rate}


def run_experiment(config: ExperimentConfig | None, subcommand: str, flags: dict | None = None,
                   out_dir=None) -> ExperimentReport:
    """Run one subcommand; writes its files to ``out_dir`` when given.

    ``flags`` may hold ``eps``/``k`` lists, ``zeta`` (complex), ``n``/``m``/``lengths``
    for ``design`` and ``wide`` for ``eps-smatrix``.
    """
    if subcommand not in _RUNNERS:
        raise ValueError(f"unknown subcommand {subcommand!r}; choose from {', '.join(SUBCOMMANDS)}")
    if config is None and subcommand != "design":
        raise ValidationError(f"{subcommand} needs --config")
    t0 = time.perf_counter()
    records, texts = _RUNNERS[subcommand](config, dict(flags or {}))
    report = ExperimentReport(subcommand, config_hash(config) if config else None, records,
                              texts, time.perf_counter() - t0)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in texts.items():
            (out / name).write_text(text, encoding="utf-8")
        (out / f"{subcommand}.report.json").write_text(
            json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    return report


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _complex(text):
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("expected re,im")
    return complex(*vals)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stargraph",
                                description="Scattering on star graphs with shrinking potentials.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--out", help="output directory (default: print to stdout)")
    p.add_argument("--eps", type=_floats, help="comma-separated eps values")
    p.add_argument("--k", type=_floats, help="comma-separated momenta")
    p.add_argument("--zeta", type=_complex, help="spectral parameter as re,im")
    p.add_argument("--n", type=int, help="number of edges (design)")
    p.add_argument("--m", type=int, help="resonance order (design)")
    p.add_argument("--lengths", type=_floats, help="support lengths (design)")
    p.add_argument("--wide", action="store_true", help="one row per S-matrix (eps-smatrix)")
    return p


def _provenance(exc) -> str:
    for frame in reversed(traceback.extract_tb(exc.__traceback__)):
        stem = Path(frame.filename).stem
        if "stargraph" in Path(frame.filename).parts and stem in _PROVENANCE:
            return _PROVENANCE[stem]
    return getattr(exc, "module", "stargraph")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: v for k, v in vars(args).items()
             if k not in ("subcommand", "config", "out") and v not in (None, False)}
    try:
        config = load_config(args.config) if args.config else None
        report = run_experiment(config, args.subcommand, flags, args.out)
    except StarGraphError as exc:
        print(f"error [{_provenance(exc)}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [cli-harness] {exc}", file=sys.stderr)
        return 1
    if args.out is None:
        for text in report.outputs.values():
            sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
