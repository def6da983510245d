"""Convergence studies, reference QoI values and field export for the built-in examples."""
import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .estimators import build_report, qoi_value, solve_field
from .mesh import build_mesh
from .problem import ProblemSpec, builtin_example, eval_exact_qoi
from .solver import SolverError
from .vtk import write_vtk

log = logging.getLogger(__name__)

CSV_FIELDS = ("example", "n", "h", "dofs", "Q_uh", "Q_ref", "ref_provenance", "err_abs",
              "eta1", "eta2", "ieff1", "ieff2", "rate_pairwise")


class HarnessError(RuntimeError):
    pass


@dataclass
class ConvergenceRecord:
    example: str
    n: int
    h: float
    dofs: int
    Q_uh: float
    Q_ref: float
    ref_provenance: str
    err_abs: float
    eta1: float
    eta2: float
    ieff1: float
    ieff2: float
    rate_pairwise: float = None  # undefined on the first level


@dataclass(frozen=True)
class ReferenceQoi:
    value: float
    provenance: str  # "analytic" or "fine-mesh n=..."
    n: int = None
    cached: bool = False


@dataclass(frozen=True)
class LevelResult:
    record: ConvergenceRecord
    primal: object
    dual: object
    report: object


def _problem(example):
    if isinstance(example, ProblemSpec):
        return example
    return builtin_example(example)


def cache_dir():
    root = os.environ.get("OSGS_GOAL_CACHE")
    if root:
        return Path(root)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "osgs_goal"


def _cache_file(problem, n):
    return cache_dir() / f"{problem.name}_n{n}_v{__version__}.json"


def _read_cache(path):
    try:
        data = json.loads(path.read_text())
        return float(data["value"]), data["provenance"]
    except (OSError, ValueError, KeyError):
        return None


def _write_cache(path, value, provenance):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps({"value": value, "provenance": provenance, "version": __version__}))
        tmp.replace(path)
    except OSError as exc:
        log.warning("could not cache reference value at %s: %s", path, exc)


def compute_reference_qoi(example, override_n=None, use_cache=True, method="auto", h_definition="diameter"):
    """Reference Q(u): analytic quadrature when an exact solution exists, else a fine-mesh solve.

    The fine mesh is the example's ``reference_n`` unless ``override_n`` is
    given. Fine-mesh values are cached under :func:`cache_dir`, keyed by
    example, n and package version.
    """
    problem = _problem(example)
    if problem.exact is not None and override_n is None:
        return ReferenceQoi(eval_exact_qoi(problem), "analytic")
    n = override_n or problem.reference_n
    if n is None:
        raise HarnessError(f"{problem.name}: no analytic solution and no reference mesh size")
    path = _cache_file(problem, n)
    if use_cache and h_definition == "diameter":
        hit = _read_cache(path)
        if hit is not None:
            return ReferenceQoi(hit[0], hit[1], n, cached=True)
    try:
        mesh = build_mesh(problem.domain, n, h_definition)
        primal = solve_field(mesh, problem, "primal", method=method)
    except (MemoryError, SolverError) as exc:
        raise HarnessError(f"{problem.name}: reference solve on n={n} failed ({exc}); "
                           "rerun with a smaller reference size (--ref-n)") from None
    value = qoi_value(primal, problem.qoi)
    provenance = f"fine-mesh n={n}"
    if use_cache and h_definition == "diameter":
        _write_cache(path, value, provenance)
    return ReferenceQoi(value, provenance, n)


def pairwise_rates(h, err):
    """log(e_i / e_{i-1}) / log(h_i / h_{i-1}); None for the first level."""
    rates = [None]
    for i in range(1, len(h)):
        if err[i] > 0.0 and err[i - 1] > 0.0:
            rates.append(math.log(err[i] / err[i - 1]) / math.log(h[i] / h[i - 1]))
        else:
            rates.append(math.nan)
    return rates


def least_squares_rate(records):
    """Slope of log|error| against log h over all records."""
    h = np.array([r.h for r in records])
    e = np.array([r.err_abs for r in records])
    if len(records) < 2 or np.any(e <= 0.0):
        return math.nan
    slope, _ = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope)


def solve_level(problem, n, reference, h_definition="diameter", quad_points=None, path="monolithic",
                method="auto", tol=1e-12, xi_space="interior", velocity=None):
    """Primal and dual solve plus estimates on one mesh."""
    mesh = build_mesh(problem.domain, n, h_definition)
    opts = dict(quad_points=quad_points, velocity=velocity, path=path, method=method, tol=tol, xi_space=xi_space)
    primal = solve_field(mesh, problem, "primal", **opts)
    dual = solve_field(mesh, problem, "dual", **opts)
    rep = build_report(problem, primal, dual, reference.value)
    rec = ConvergenceRecord(
        example=problem.name, n=n, h=mesh.h, dofs=primal.report.stats["n"],
        Q_uh=rep.qoi_uh, Q_ref=reference.value, ref_provenance=reference.provenance,
        err_abs=abs(rep.error), eta1=rep.eta1, eta2=rep.eta2, ieff1=rep.ieff1, ieff2=rep.ieff2)
    for flag in rep.flags:
        log.info("%s n=%d: %s", problem.name, n, flag)
    return LevelResult(rec, primal, dual, rep)


def run_convergence(example, sizes=None, reference=None, ref_n=None, csv_path=None, workers=1,
                    keep_fields=False, **level_opts):
    """Solve every level in ``sizes`` and return the records ordered by n.

    A level whose solve fails is logged and left out. ``workers`` > 1 runs
    levels in a thread pool. With ``keep_fields`` the per-level
    :class:`LevelResult` objects are returned alongside the records.
    """
    problem = _problem(example)
    sizes = list(sizes or problem.default_sizes)
    if not sizes:
        raise HarnessError("no mesh sizes given")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise HarnessError(f"mesh sizes must be strictly increasing, got {sizes}")
    if reference is None:
        reference = compute_reference_qoi(problem, ref_n)

    def one(n):
        try:
            return solve_level(problem, n, reference, **level_opts)
        except (SolverError, MemoryError, ValueError) as exc:
            log.error("%s n=%d: level aborted: %s", problem.name, n, exc)
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, sizes))
    else:
        results = [one(n) for n in sizes]
    results = sorted((r for r in results if r is not None), key=lambda r: r.record.n)
    records = [r.record for r in results]
    rates = pairwise_rates([r.h for r in records], [r.err_abs for r in records])
    for rec, rate in zip(records, rates):
        rec.rate_pairwise = rate
    if csv_path is not None:
        write_records_csv(records, csv_path)
    return (records, results) if keep_fields else records


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_records_csv(records, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for rec in records:
            row = asdict(rec)
            w.writerow([_fmt(row[k]) for k in CSV_FIELDS])
    return path


def read_records_csv(path):
    types = {f.name: f.type for f in fields(ConvergenceRecord)}
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for key, raw in row.items():
                if types[key] is str:
                    kw[key] = raw
                elif types[key] is int:
                    kw[key] = int(raw)
                else:
                    kw[key] = None if raw == "" else float(raw)
            out.append(ConvergenceRecord(**kw))
    return out


def export_fields(primal, dual, report, path):
    """Write ``path``.vtk (u_h, z_h, eta1, eta2, tau) and a per-element ``path``.csv.

    ``path`` is a stem; existing suffixes are replaced. Returns both paths.
    """
    mesh = primal.mesh
    if mesh.n_elements == 0:
        raise HarnessError("cannot export fields of an empty mesh")
    stem = Path(path)
    vtk_path, csv_path = stem.with_suffix(".vtk"), stem.with_suffix(".csv")
    tau = np.broadcast_to(np.asarray(report.tau, dtype=float), (mesh.n_elements,))
    point = {"u_h": primal.values}
    if dual is not None:
        point["z_h"] = dual.values
    cell = {"eta1": report.eta1_local, "eta2": report.eta2_local, "tau": tau}
    try:
        stem.parent.mkdir(parents=True, exist_ok=True)
        write_vtk(vtk_path, mesh, point, cell, title=f"{report.example} n={report.n}")
        centers = mesh.element_coords().mean(axis=1)
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            coords = ["x", "y"][: mesh.dim]
            w.writerow(["element", *coords, "eta1", "eta2", "tau"])
            for e in range(mesh.n_elements):
                w.writerow([e, *(_fmt(float(c)) for c in centers[e]),
                            _fmt(float(report.eta1_local[e])), _fmt(float(report.eta2_local[e])),
                            _fmt(float(tau[e]))])
    except OSError as exc:
        raise HarnessError(f"cannot write fields to {stem}: {exc}") from None
    return vtk_path, csv_path
