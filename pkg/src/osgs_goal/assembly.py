"""Assembly of the coupled OSGS block system for the primal and dual problems.

Unknowns are the free nodal values of the field (u or z) and the nodal
values of the residual projection xi. By default xi lives in the same
constrained space as the field (zero on Dirichlet nodes), so constants
are not in the projection space; ``xi_space='all'`` puts xi on every node
instead. The block layout is::

    [ K  -P ] [u ]   [F_tau]
    [ D   M ] [xi] = [F    ]

with Dirichlet values already lifted into the right-hand sides.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .fe_space import build_dofmap, map_to_physical, reference_element
from .problem import StabilizationConstants, eval_tau


class AssemblyError(ValueError):
    pass


class SingularMassError(AssemblyError):
    pass


@dataclass(frozen=True)
class QuadratureData:
    """Reference element plus physical points of every element."""

    ref: object
    coords: np.ndarray
    x: np.ndarray  # (nel, nq, dim)

    @property
    def wdet(self):
        return map_to_physical(self.coords, self.ref).wdet


def quadrature_data(mesh, points):
    ref = reference_element(mesh.dim, points)
    coords = np.ascontiguousarray(mesh.element_coords())
    x = np.einsum("qa,eai->eqi", ref.N, coords)
    return QuadratureData(ref, coords, x)


def element_tau(mesh, problem, constants=StabilizationConstants(), quad=None, velocity=None):
    """Stabilization parameter per element.

    ``velocity`` defaults to the problem's setting. ``'element'`` takes |a| as the largest velocity magnitude at the
    element's quadrature points; ``'domain'`` uses the largest over the mesh
    (a single tau for a uniform mesh).
    """
    quad = quad or quadrature_data(mesh, 2)
    velocity = velocity or problem.tau_velocity
    speed = np.linalg.norm(problem.advection(quad.x), axis=-1)
    if velocity == "element":
        a_norm = speed.max(axis=1)
    elif velocity == "domain":
        a_norm = np.full(mesh.n_elements, speed.max())
    else:
        raise AssemblyError(f"unknown velocity scale {velocity!r}")
    return eval_tau(problem.k, a_norm, problem.s, mesh.h_per_element, constants)


@dataclass(frozen=True)
class BlockSystem:
    kind: str  # "primal" or "dual"
    K: sp.csr_matrix  # n_free x n_free
    P: sp.csr_matrix  # n_free x n_nodes
    D: sp.csr_matrix  # n_nodes x n_free
    M: sp.csr_matrix  # n_nodes x n_nodes
    F_tau: np.ndarray
    F: np.ndarray
    dofmap: object
    xi_nodes: np.ndarray
    tau: np.ndarray
    quad_points: int

    @property
    def n_u(self):
        return self.K.shape[0]

    @property
    def n_xi(self):
        return self.M.shape[0]

    def matrix(self):
        return sp.bmat([[self.K, -self.P], [self.D, self.M]], format="csc")

    def rhs(self):
        return np.concatenate([self.F_tau, self.F])

    def expand_xi(self, xi):
        full = np.zeros(self.dofmap.n_nodes)
        full[self.xi_nodes] = xi
        return full

    def split(self, x):
        """Full nodal field and projection from a monolithic solution vector."""
        return self.dofmap.expand(x[: self.n_u]), self.expand_xi(x[self.n_u:])


def _scatter(elements, Ae, n):
    nen = elements.shape[1]
    rows = np.repeat(elements, nen, axis=1).ravel()
    cols = np.tile(elements, (1, nen)).ravel()
    return sp.coo_matrix((Ae.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _scatter_vec(elements, Fe, n):
    return np.bincount(elements.ravel(), weights=Fe.ravel(), minlength=n)


def _assemble(mesh, problem, kind, constants, quad_points, velocity, tau, backend, xi_space):
    if mesh.dim != problem.dim:
        raise AssemblyError(f"mesh is {mesh.dim}D but problem {problem.name} is {problem.dim}D")
    problem.check_mesh_size(mesh.n)
    points = quad_points or problem.quad_points
    quad = quadrature_data(mesh, points)
    if tau is None:
        tau = element_tau(mesh, problem, constants, quad, velocity)
    adv = np.ascontiguousarray(problem.advection(quad.x))
    if kind == "primal":
        src = problem.forcing(quad.x)
        sign = 1.0
        dofmap = build_dofmap(mesh, problem.dirichlet)
    elif kind == "dual":
        src = problem.qoi.q(quad.x)
        sign = -1.0
        dofmap = build_dofmap(mesh, problem.dirichlet, homogeneous=True)
    else:
        raise AssemblyError(f"unknown system kind {kind!r}")
    ref = quad.ref
    Ke, Pe, De, Me, Fte, Fe = kernels.element_matrices(
        quad.coords, ref.N, ref.dN, ref.weights, adv, np.ascontiguousarray(src, dtype=float),
        np.ascontiguousarray(tau, dtype=float), problem.k, problem.s, sign, backend=backend)
    n = mesh.n_nodes
    el = mesh.elements
    K = _scatter(el, Ke, n)
    P = _scatter(el, Pe, n)
    D = _scatter(el, De, n)
    M = _scatter(el, Me, n)
    F_tau = _scatter_vec(el, Fte, n)
    F = _scatter_vec(el, Fe, n)
    free, fixed, ud = dofmap.free, dofmap.fixed, dofmap.values[dofmap.fixed]
    if xi_space == "interior":
        xi_nodes = free
    elif xi_space == "all":
        xi_nodes = np.arange(n)
    else:
        raise AssemblyError(f"unknown projection space {xi_space!r}")
    K_free = K[free]
    D_rows = D[xi_nodes].tocsc()
    return BlockSystem(
        kind=kind,
        K=K_free[:, free].tocsr(),
        P=P[free][:, xi_nodes].tocsr(),
        D=D_rows[:, free].tocsr(),
        M=M[xi_nodes][:, xi_nodes].tocsr(),
        F_tau=F_tau[free] - K_free[:, fixed] @ ud,
        F=F[xi_nodes] - D_rows[:, fixed] @ ud,
        dofmap=dofmap,
        xi_nodes=xi_nodes,
        tau=np.asarray(tau, dtype=float),
        quad_points=points,
    )


def assemble_primal(mesh, problem, constants=StabilizationConstants(), quad_points=None,
                    velocity=None, tau=None, backend=None, xi_space="interior"):
    """Coupled block system for u_h and the projection of its residual."""
    return _assemble(mesh, problem, "primal", constants, quad_points, velocity, tau, backend, xi_space)


def assemble_dual(mesh, problem, constants=StabilizationConstants(), quad_points=None,
                  velocity=None, tau=None, backend=None, xi_space="interior"):
    """Coupled block system for z_h: reversed advection, forcing q, homogeneous data."""
    return _assemble(mesh, problem, "dual", constants, quad_points, velocity, tau, backend, xi_space)


@dataclass(frozen=True)
class CondensedSystem:
    A: sp.csc_matrix
    b: np.ndarray
    M_lumped: np.ndarray
    system: BlockSystem

    def recover(self, u_free):
        """Projection values (all nodes) from the condensed solution."""
        s = self.system
        return s.expand_xi((s.F - s.D @ u_free) / self.M_lumped)


def lumped_mass(M):
    m = np.asarray(M.sum(axis=1)).ravel()
    if np.any(m <= 0.0):
        raise SingularMassError("lumped mass matrix has a non-positive entry")
    return m


def condense_lumped(system):
    """Eliminate xi with the row-sum lumped mass: (K + P M_L^-1 D) u = F_tau + P M_L^-1 F."""
    m = lumped_mass(system.M)
    Minv = sp.diags(1.0 / m)
    A = (system.K + system.P @ Minv @ system.D).tocsc()
    b = system.F_tau + system.P @ (system.F / m)
    return CondensedSystem(A, b, m, system)


def schur_operator(system):
    """Dense K + P M^-1 D with the consistent mass; for small verification runs."""
    Minv_D = np.linalg.solve(system.M.toarray(), system.D.toarray())
    return system.K.toarray() + system.P.toarray() @ Minv_D


def write_coo(matrix, path):
    """Plain-text ``i j value`` dump, one nonzero per line, 0-based."""
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"% {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{i} {j} {v:.17g}\n")
