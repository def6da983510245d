"""Command-line entry point: ``osgs-goal <command> [options]``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
import argparse
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import __version__, kernels
from .harness import (
    HarnessError, compute_reference_qoi, export_fields, least_squares_rate, run_convergence, solve_level,
)
from .mesh import MeshError, build_mesh
from .problem import ProblemError, builtin_example, example_ids, load_problem_file
from .solver import SolverError

COMMANDS = ("list-examples", "solve", "estimate", "convergence", "reference")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    example: str = None
    problem: str = None
    n: int = None
    quad: int = None
    h_definition: str = "diameter"
    path: str = "monolithic"
    out: str = "."
    ref_n: int = None
    tol: float = 1e-12
    sizes: tuple = None
    threads: int = 1
    solver: str = "auto"
    tau_velocity: str = None
    xi_space: str = "interior"
    no_cache: bool = False

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.command == "list-examples":
            return self
        if (self.example is None) == (self.problem is None):
            raise UsageError("give exactly one of --example or --problem")
        if self.example is not None and self.example not in example_ids():
            raise UsageError(f"unknown example {self.example!r} (choose from {', '.join(example_ids())})")
        for name in ("n", "ref_n", "quad"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v < 1):
                raise UsageError(f"--{name.replace('_', '-')} must be a positive integer")
        if self.quad is not None and self.quad > 5:
            raise UsageError("--quad must be between 1 and 5")
        if self.h_definition not in ("diameter", "edge"):
            raise UsageError("--h-definition must be 'diameter' or 'edge'")
        if self.path not in ("monolithic", "condensed"):
            raise UsageError("--path must be 'monolithic' or 'condensed'")
        if self.solver not in ("auto", "direct", "gmres"):
            raise UsageError("--solver must be 'auto', 'direct' or 'gmres'")
        if self.tau_velocity not in (None, "element", "domain"):
            raise UsageError("--tau-velocity must be 'element' or 'domain'")
        if self.xi_space not in ("interior", "all"):
            raise UsageError("--xi-space must be 'interior' or 'all'")
        if not (isinstance(self.tol, float) and 0.0 < self.tol < 1.0):
            raise UsageError("--tol must lie in (0, 1)")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise UsageError("--threads must be a positive integer")
        if self.sizes is not None:
            if not self.sizes or any(not isinstance(v, int) or v < 1 for v in self.sizes):
                raise UsageError("--sizes must be a comma-separated list of positive integers")
            if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
                raise UsageError("--sizes must be strictly increasing")
        return self


def parse_sizes(text):
    if isinstance(text, (list, tuple)):
        items = list(text)
    else:
        items = [t.strip() for t in str(text).split(",") if t.strip()]
    try:
        sizes = tuple(int(t) for t in items)
    except (TypeError, ValueError):
        raise UsageError(f"malformed sizes {text!r}: expected e.g. 10,20,40") from None
    if not sizes:
        raise UsageError(f"malformed sizes {text!r}: expected e.g. 10,20,40")
    return sizes


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with the same keys as the flags; flags win")
    src = common.add_mutually_exclusive_group()
    src.add_argument("--example", help="built-in example id (see list-examples)")
    src.add_argument("--problem", help="JSON problem description file")
    common.add_argument("--n", type=int, help="mesh divisions per unit length")
    common.add_argument("--quad", type=int, help="Gauss points per direction (default: problem setting)")
    common.add_argument("--h-definition", dest="h_definition", choices=("diameter", "edge"),
                        help="element size used in tau (default: diameter)")
    common.add_argument("--path", choices=("monolithic", "condensed"),
                        help="coupled solve or lumped-mass condensation (default: monolithic)")
    common.add_argument("--out", help="output directory (default: .)")
    common.add_argument("--ref-n", dest="ref_n", type=int,
                        help="mesh size for a fine-mesh reference, overriding the example's")
    common.add_argument("--tol", type=float, help="iterative solver tolerance (default: 1e-12)")
    common.add_argument("--sizes", help="comma-separated mesh sizes for convergence")
    common.add_argument("--threads", type=int, help="kernel threads and concurrent levels (default: 1)")
    common.add_argument("--solver", choices=("auto", "direct", "gmres"),
                        help="linear solver (default: auto, direct below 150k unknowns)")
    common.add_argument("--tau-velocity", dest="tau_velocity", choices=("element", "domain"),
                        help="velocity scale in tau (default: problem setting)")
    common.add_argument("--xi-space", dest="xi_space", choices=("interior", "all"),
                        help="nodes carrying the residual projection (default: interior)")
    common.add_argument("--no-cache", dest="no_cache", action="store_const", const=True,
                        help="recompute fine-mesh references instead of reading the cache")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="osgs-goal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("list-examples", parents=[common], help="show the built-in examples")
    sub.add_parser("solve", parents=[common], help="primal and dual solve, print Q(u_h)")
    sub.add_parser("estimate", parents=[common], help="solve, estimate the QoI error, write VTK/CSV")
    sub.add_parser("convergence", parents=[common], help="mesh refinement study, write CSV")
    sub.add_parser("reference", parents=[common], help="reference value of the QoI")
    return parser


def make_config(argv):
    ns = build_parser().parse_args(argv)
    values = {}
    if ns.config:
        try:
            data = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        known = {f.name for f in fields(RunConfig)} - {"command"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        values.update(data)
    for f in fields(RunConfig):
        if f.name != "command" and getattr(ns, f.name, None) is not None:
            values[f.name] = getattr(ns, f.name)
    if "sizes" in values and values["sizes"] is not None:
        values["sizes"] = parse_sizes(values["sizes"])
    if "tol" in values:
        try:
            values["tol"] = float(values["tol"])
        except (TypeError, ValueError):
            raise UsageError("--tol must be a number") from None
    # a source given on the command line replaces the one in the config file
    if ns.example is not None:
        values.pop("problem", None)
    if ns.problem is not None:
        values.pop("example", None)
    return RunConfig(command=ns.command, **values).validate(), ns.verbose


def _problem_and_n(cfg):
    if cfg.example is not None:
        return builtin_example(cfg.example), cfg.n
    problem, n = load_problem_file(cfg.problem)
    return problem, cfg.n or n


def _level_opts(cfg):
    return dict(h_definition=cfg.h_definition, quad_points=cfg.quad, path=cfg.path, method=cfg.solver,
                tol=cfg.tol, xi_space=cfg.xi_space, velocity=cfg.tau_velocity)


def _require_n(cfg, n):
    if n is None:
        raise UsageError(f"{cfg.command} needs --n")
    return n


def _out_dir(cfg):
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise HarnessError(f"cannot create output directory {out}: {exc}") from None
    return out


def _reference(cfg, problem):
    return compute_reference_qoi(problem, cfg.ref_n, use_cache=not cfg.no_cache, method=cfg.solver)


def cmd_list_examples(cfg, out):
    for eid in example_ids():
        p = builtin_example(eid)
        ref = "analytic" if p.exact is not None else f"fine mesh n={p.reference_n}"
        sizes = ",".join(map(str, p.default_sizes))
        print(f"{eid}  {p.domain:8s} k={p.k:g} s={p.s:g}  Q~{p.published_qoi}  ref: {ref}  sizes: {sizes}  "
              f"{p.description}", file=out)
    return 0


def cmd_solve(cfg, out):
    from .estimators import qoi_value, solve_field

    problem, n = _problem_and_n(cfg)
    n = _require_n(cfg, n)
    mesh = build_mesh(problem.domain, n, cfg.h_definition)
    opts = {k: v for k, v in _level_opts(cfg).items() if k != "h_definition"}
    primal = solve_field(mesh, problem, "primal", **opts)
    dual = solve_field(mesh, problem, "dual", **opts)
    print(f"{problem.name} n={n} h={mesh.h:.6g} dofs={primal.report.stats['n']} "
          f"Q_uh={qoi_value(primal, problem.qoi):.10f} "
          f"residual_primal={primal.report.residual:.2e} residual_dual={dual.report.residual:.2e} "
          f"solver={primal.report.method}", file=out)
    return 0


def cmd_estimate(cfg, out):
    problem, n = _problem_and_n(cfg)
    n = _require_n(cfg, n)
    outdir = _out_dir(cfg)
    ref = _reference(cfg, problem)
    level = solve_level(problem, n, ref, **_level_opts(cfg))
    vtk, csv_path = export_fields(level.primal, level.dual, level.report, outdir / f"{problem.name}_{n}")
    print(level.report.summary() + f" ref={ref.provenance}", file=out)
    print(f"wrote {vtk} {csv_path}", file=out)
    return 0


def cmd_convergence(cfg, out):
    problem, _ = _problem_and_n(cfg)
    sizes = cfg.sizes or problem.default_sizes
    if not sizes:
        raise UsageError("convergence needs --sizes for a problem file")
    outdir = _out_dir(cfg)
    ref = _reference(cfg, problem)
    csv_path = outdir / f"{problem.name}_convergence.csv"
    records = run_convergence(problem, sizes, reference=ref, csv_path=csv_path, workers=cfg.threads,
                              **_level_opts(cfg))
    if len(records) != len(sizes):
        done = {r.n for r in records}
        raise HarnessError(f"levels failed: {sorted(set(sizes) - done)} (see log)")
    print(f"{'n':>6} {'h':>11} {'Q_uh':>12} {'|err|':>11} {'eta1':>12} {'eta2':>12} "
          f"{'ieff1':>8} {'ieff2':>8} {'rate':>6}", file=out)
    for r in records:
        rate = "" if r.rate_pairwise is None else f"{r.rate_pairwise:.2f}"
        print(f"{r.n:6d} {r.h:11.4e} {r.Q_uh:12.8f} {r.err_abs:11.4e} {r.eta1:12.4e} {r.eta2:12.4e} "
              f"{r.ieff1:8.4f} {r.ieff2:8.4f} {rate:>6}", file=out)
    print(f"least-squares rate {least_squares_rate(records):.3f}; reference {ref.value:.10f} ({ref.provenance})",
          file=out)
    print(f"wrote {csv_path}", file=out)
    return 0


def cmd_reference(cfg, out):
    problem, _ = _problem_and_n(cfg)
    ref = _reference(cfg, problem)
    note = " (cached)" if ref.cached else ""
    print(f"{problem.name} Q_ref={ref.value:.10f} provenance={ref.provenance}{note}", file=out)
    return 0


HANDLERS = {
    "list-examples": cmd_list_examples,
    "solve": cmd_solve,
    "estimate": cmd_estimate,
    "convergence": cmd_convergence,
    "reference": cmd_reference,
}


def main(argv=None, out=None):
    out = out or sys.stdout
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg, verbose = make_config(argv)
    except UsageError as exc:
        print(f"osgs-goal: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")
    logging.captureWarnings(True)
    kernels.set_threads(cfg.threads)
    try:
        return HANDLERS[cfg.command](cfg, out)
    except UsageError as exc:
        print(f"osgs-goal: error: {exc}", file=sys.stderr)
        return 2
    except (ProblemError, MeshError) as exc:
        print(f"osgs-goal: error: {exc}", file=sys.stderr)
        return 2
    except (HarnessError, SolverError, OSError, MemoryError, ValueError) as exc:
        print(f"osgs-goal: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
