"""Subgrid scales, QoI values and the two goal-oriented error estimators.

With u_h solved and xi_h = P_h(f - L u_h), the modelled subscale on an
element is tau (R u_h - xi_h). The explicit estimator integrates it
against q; the implicit one pairs the dual subscale with the primal
residual and L* z_h with the primal subscale. For degree-1 elements the
Laplacian parts of L and L* vanish elementwise and are not evaluated.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .assembly import assemble_dual, assemble_primal, quadrature_data
from .fe_space import map_to_physical
from .problem import StabilizationConstants
from .solver import solve_block


class EstimatorError(ValueError):
    pass


@dataclass(frozen=True)
class SolutionField:
    kind: str  # "primal" or "dual"
    mesh: object
    values: np.ndarray
    xi: np.ndarray = None
    tau: np.ndarray = None
    quad_points: int = 2
    report: object = None

    def __post_init__(self):
        if self.values.shape != (self.mesh.n_nodes,):
            raise EstimatorError("nodal values do not match the mesh")
        if self.xi is not None and self.xi.shape != (self.mesh.n_nodes,):
            raise EstimatorError("projection values do not match the mesh")


def solve_field(mesh, problem, kind="primal", constants=StabilizationConstants(), quad_points=None,
                velocity=None, path="monolithic", method="auto", tol=1e-12, xi_space="interior"):
    assemble = assemble_primal if kind == "primal" else assemble_dual
    system = assemble(mesh, problem, constants, quad_points, velocity, xi_space=xi_space)
    values, xi, report = solve_block(system, path, method, tol)
    return SolutionField(kind, mesh, values, xi, system.tau, system.quad_points, report)


def _check(solution, mesh):
    if solution.mesh is not mesh and (
            solution.mesh.n_nodes != mesh.n_nodes or solution.mesh.n_elements != mesh.n_elements):
        raise EstimatorError("solution was computed on a different mesh")


def _at_points(solution, problem, quad):
    mesh = solution.mesh
    geo = map_to_physical(quad.coords, quad.ref)
    nodal = solution.values[mesh.elements]
    vals = nodal @ quad.ref.N.T
    grads = np.einsum("eqai,ea->eqi", geo.grad, nodal)
    adv = problem.advection(quad.x)
    a_grad = np.einsum("eqi,eqi->eq", adv, grads)
    return geo, vals, a_grad


def residual_at_qp(solution, problem, mesh=None, quad_points=None):
    """Strong residual at every quadrature point, shape (nel, nq).

    Primal: f - a.grad u_h - s u_h. Dual: q + a.grad z_h - s z_h.
    """
    mesh = mesh or solution.mesh
    _check(solution, mesh)
    quad = quadrature_data(mesh, quad_points or solution.quad_points)
    _, vals, a_grad = _at_points(solution, problem, quad)
    if solution.kind == "primal":
        return problem.forcing(quad.x) - a_grad - problem.s * vals
    return problem.qoi.q(quad.x) + a_grad - problem.s * vals


def projection_at_qp(solution, mesh=None, quad_points=None):
    mesh = mesh or solution.mesh
    if solution.xi is None:
        raise EstimatorError("residual projection is missing")
    quad = quadrature_data(mesh, quad_points or solution.quad_points)
    return solution.xi[mesh.elements] @ quad.ref.N.T


def orthogonal_residual_at_qp(solution, problem, mesh=None, quad_points=None):
    """Residual minus its projection onto the finite element space."""
    return (residual_at_qp(solution, problem, mesh, quad_points)
            - projection_at_qp(solution, mesh, quad_points))


def orthogonality_moments(solution, problem, quad_points=None):
    """sum_K <P_perp(R), N_i>_K for every nodal basis function N_i."""
    mesh = solution.mesh
    qp = quad_points or solution.quad_points
    quad = quadrature_data(mesh, qp)
    PR = orthogonal_residual_at_qp(solution, problem, mesh, qp)
    wdet = map_to_physical(quad.coords, quad.ref).wdet
    local = np.einsum("eq,eq,qa->ea", wdet, PR, quad.ref.N)
    return np.bincount(mesh.elements.ravel(), weights=local.ravel(), minlength=mesh.n_nodes)


def qoi_value(solution, qoi, mesh=None, quad_points=None):
    """Q(u_h) = sum_K int_K q u_h."""
    mesh = mesh or solution.mesh
    quad = quadrature_data(mesh, quad_points or solution.quad_points)
    wdet = map_to_physical(quad.coords, quad.ref).wdet
    uh = solution.values[mesh.elements] @ quad.ref.N.T
    return float(np.sum(wdet * qoi.q(quad.x) * uh))


def _estimator_kernel(primal, dual, problem, tau, backend=None):
    mesh = primal.mesh
    if primal.xi is None:
        raise EstimatorError("primal solution has no residual projection")
    if dual is not None:
        _check(dual, mesh)
        if dual.xi is None:
            raise EstimatorError("dual solution has no residual projection")
        if dual.quad_points != primal.quad_points:
            raise EstimatorError("primal and dual were assembled with different quadrature")
    quad = quadrature_data(mesh, primal.quad_points)
    ref = quad.ref
    el = mesh.elements
    adv = np.ascontiguousarray(problem.advection(quad.x))
    f = np.ascontiguousarray(problem.forcing(quad.x), dtype=float)
    q = np.ascontiguousarray(problem.qoi.q(quad.x), dtype=float)
    if tau is None:
        tau = primal.tau
    zeros = np.zeros(el.shape)
    z = dual.values[el] if dual is not None else zeros
    xid = dual.xi[el] if dual is not None else zeros
    return kernels.element_estimators(
        quad.coords, ref.N, ref.dN, ref.weights, adv, f, q, np.ascontiguousarray(tau, dtype=float),
        problem.s, primal.values[el], primal.xi[el], z, xid, backend=backend)


def eta1(primal, problem, tau=None, backend=None):
    """Explicit estimate: per element <q, tau P_perp(R u_h)>_K, and their sum."""
    local, _ = _estimator_kernel(primal, None, problem, tau, backend)
    return local, float(np.sum(local))


def eta2(primal, dual, problem, tau=None, backend=None):
    """Implicit estimate from the primal and dual subscales, per element and summed."""
    if dual is None:
        raise EstimatorError("implicit estimate needs the dual solution")
    _, local = _estimator_kernel(primal, dual, problem, tau, backend)
    return local, float(np.sum(local))


def effectivity(reference_q, qoi_uh, eta):
    """|Q(u) - Q(u_h)| / |eta|; inf when eta = 0 with a nonzero error, nan for 0/0."""
    err = abs(reference_q - qoi_uh)
    if eta == 0.0:
        return math.nan if err == 0.0 else math.inf
    return err / abs(eta)


@dataclass
class EstimatorReport:
    example: str
    n: int
    h: float
    dofs: int
    qoi_uh: float
    reference_q: float
    eta1_local: np.ndarray
    eta2_local: np.ndarray
    eta1: float
    eta2: float
    ieff1: float
    ieff2: float
    tau: np.ndarray
    flags: list = field(default_factory=list)

    @property
    def error(self):
        return self.reference_q - self.qoi_uh

    def summary(self):
        return (f"{self.example} n={self.n} h={self.h:.6g} dofs={self.dofs} "
                f"Q_uh={self.qoi_uh:.6f} Q_ref={self.reference_q:.6f} "
                f"error={self.error:.6e} eta1={self.eta1:.6e} eta2={self.eta2:.6e} "
                f"ieff1={self.ieff1:.4f} ieff2={self.ieff2:.4f}"
                + (f" flags={','.join(self.flags)}" if self.flags else ""))


def build_report(problem, primal, dual, reference_q, backend=None):
    mesh = primal.mesh
    local1, local2 = _estimator_kernel(primal, dual, problem, None, backend)
    e1, e2 = float(np.sum(local1)), float(np.sum(local2))
    quh = qoi_value(primal, problem.qoi)
    flags = []
    err = reference_q - quh
    for name, eta in (("eta1", e1), ("eta2", e2)):
        if eta == 0.0 and err != 0.0:
            flags.append(f"{name}-degenerate")
        elif err * eta < 0.0:
            flags.append(f"{name}-sign-mismatch")
    dofs = primal.report.stats["n"] if primal.report is not None else mesh.n_nodes
    return EstimatorReport(
        example=problem.name, n=mesh.n, h=mesh.h, dofs=dofs, qoi_uh=quh, reference_q=reference_q,
        eta1_local=local1, eta2_local=local2, eta1=e1, eta2=e2,
        ieff1=effectivity(reference_q, quh, e1), ieff2=effectivity(reference_q, quh, e2),
        tau=primal.tau, flags=flags)
