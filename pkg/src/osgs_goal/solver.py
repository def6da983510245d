"""Sparse linear solves with a residual check."""
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    pass


class FactorizationError(SolverError):
    pass


class NoConvergenceError(SolverError):
    pass


@dataclass
class SolveReport:
    x: np.ndarray
    residual: float
    method: str
    seconds: float
    stats: dict = field(default_factory=dict)

    def as_dict(self):
        return {"method": self.method, "relative_residual": self.residual,
                "seconds": self.seconds, **self.stats}


def _relative_residual(A, x, b):
    r = np.linalg.norm(A @ x - b)
    nb = np.linalg.norm(b)
    return float(r / nb) if nb > 0.0 else float(r)


DIRECT_LIMIT = 150_000


def solve(A, b, method="direct", tol=1e-12, check=1e-10, maxiter=2000):
    """Solve ``A x = b``.

    ``method='direct'`` uses SuperLU; ``'gmres'`` uses restarted GMRES with an
    incomplete-LU preconditioner and stopping tolerance ``tol``; ``'auto'``
    picks the direct path up to ``DIRECT_LIMIT`` unknowns. Every accepted
    solution satisfies ||Ax - b|| / ||b|| <= ``check``.
    """
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    if method == "auto":
        method = "direct" if A.shape[0] <= DIRECT_LIMIT else "gmres"
    if A.shape[0] != A.shape[1]:
        raise SolverError(f"matrix is not square: {A.shape}")
    if b.shape != (A.shape[0],):
        raise SolverError(f"rhs length {b.shape} does not match matrix {A.shape}")
    t0 = time.perf_counter()
    stats = {"n": A.shape[0], "nnz": int(A.nnz)}
    if method == "direct":
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", spla.MatrixRankWarning)
                lu = spla.splu(A, permc_spec="COLAMD")
        except (RuntimeError, spla.MatrixRankWarning) as exc:
            raise FactorizationError(f"sparse LU failed: {exc}") from None
        x = lu.solve(b)
        stats["fill_nnz"] = int(lu.L.nnz + lu.U.nnz)
        if not np.all(np.isfinite(x)):
            raise FactorizationError("sparse LU produced non-finite values (singular matrix?)")
    elif method == "gmres":
        ilu = spla.spilu(A, drop_tol=1e-5, fill_factor=20)
        Mop = spla.LinearOperator(A.shape, ilu.solve)
        iters = [0]

        def count(_):
            iters[0] += 1

        x, info = spla.gmres(A, b, M=Mop, rtol=tol, atol=0.0, restart=200, maxiter=maxiter,
                             callback=count, callback_type="pr_norm")
        stats["iterations"] = iters[0]
        if info != 0:
            res = _relative_residual(A, x, b)
            raise NoConvergenceError(
                f"GMRES did not converge (info={info}, iterations={iters[0]}, relative residual={res:.3e})")
    else:
        raise SolverError(f"unknown solve method {method!r}")
    res = _relative_residual(A, x, b)
    if not res <= check:
        raise SolverError(f"residual check failed: relative residual {res:.3e} > {check:.1e}")
    return SolveReport(x, res, method, time.perf_counter() - t0, stats)


def solve_block(system, path="monolithic", method="auto", tol=1e-12, check=1e-10):
    """Solve an assembled primal or dual block system.

    Returns ``(nodal_values, xi, report)``. ``path='condensed'`` eliminates the
    projection with the lumped mass and recovers it afterwards.
    """
    if path == "monolithic":
        report = solve(system.matrix(), system.rhs(), method, tol, check)
        values, xi = system.split(report.x)
    elif path == "condensed":
        from .assembly import condense_lumped

        cond = condense_lumped(system)
        report = solve(cond.A, cond.b, method, tol, check)
        values = system.dofmap.expand(report.x)
        xi = cond.recover(report.x)
    else:
        raise SolverError(f"unknown solve path {path!r}")
    report.stats["path"] = path
    return values, xi, report
