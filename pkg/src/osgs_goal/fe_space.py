"""Degree-1 reference elements (P1 interval, Q1 quad), quadrature and dof maps."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss


class FESpaceError(ValueError):
    pass


class InvertedElementError(FESpaceError):
    pass


def quadrature_rule(points_per_direction, dim=1):
    """Tensor-product Gauss-Legendre rule on [-1, 1]^dim.

    Returns ``(points, weights)`` with points of shape (nq, dim). Exact for
    polynomials of degree <= 2*points_per_direction - 1 in each direction.
    """
    p = points_per_direction
    if isinstance(p, bool) or int(p) != p or not 1 <= p <= 5:
        raise FESpaceError(f"quadrature points per direction must be in 1..5, got {p!r}")
    if dim not in (1, 2):
        raise FESpaceError(f"unsupported dimension {dim}")
    x, w = leggauss(int(p))
    if dim == 1:
        return x[:, None], w
    # x fastest, matching the node ordering of structured meshes
    X, Y = np.meshgrid(x, x)
    WX, WY = np.meshgrid(w, w)
    return np.column_stack([X.ravel(), Y.ravel()]), (WX * WY).ravel()


_Q1_VERTICES = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
_P1_VERTICES = np.array([[-1.0], [1.0]])


def shape_functions(xi, dim):
    """Values (nq, nen) and reference gradients (nq, nen, dim) at points ``xi``."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if dim == 1:
        s = _P1_VERTICES[:, 0]
        N = 0.5 * (1.0 + xi[:, :1] * s[None, :])
        dN = np.broadcast_to(0.5 * s[None, :, None], (xi.shape[0], 2, 1)).copy()
        return N, dN
    sx, sy = _Q1_VERTICES[:, 0], _Q1_VERTICES[:, 1]
    fx = 1.0 + xi[:, :1] * sx[None, :]
    fy = 1.0 + xi[:, 1:2] * sy[None, :]
    N = 0.25 * fx * fy
    dN = np.stack([0.25 * sx[None, :] * fy, 0.25 * fx * sy[None, :]], axis=-1)
    return N, dN


@dataclass(frozen=True)
class ReferenceElement:
    """Shape functions and their reference gradients tabulated at a quadrature rule."""

    dim: int
    points: np.ndarray
    weights: np.ndarray
    N: np.ndarray
    dN: np.ndarray

    @property
    def n_nodes(self):
        return self.N.shape[1]

    @property
    def n_points(self):
        return self.weights.shape[0]


@lru_cache(maxsize=None)
def reference_element(dim, points_per_direction=2):
    pts, w = quadrature_rule(points_per_direction, dim)
    N, dN = shape_functions(pts, dim)
    for a in (pts, w, N, dN):
        a.setflags(write=False)
    return ReferenceElement(dim, pts, w, N, dN)


@dataclass(frozen=True)
class ElementGeometry:
    """Per element and quadrature point: physical points, gradients and weights."""

    x: np.ndarray  # (nel, nq, dim)
    grad: np.ndarray  # (nel, nq, nen, dim)
    detJ: np.ndarray  # (nel, nq)
    wdet: np.ndarray  # (nel, nq): quadrature weight times detJ


def map_to_physical(coords, ref):
    """Map reference data onto elements with vertex coordinates ``coords``.

    ``coords`` has shape (nel, nen, dim) or (nen, dim) for a single element.
    Physical gradients satisfy grad N = J^{-T} grad_ref N.
    """
    coords = np.asarray(coords, dtype=float)
    single = coords.ndim == 2
    if single:
        coords = coords[None]
    # J[e, q, i, j] = sum_a x[e, a, i] dN[q, a, j]
    J = np.einsum("eai,qaj->eqij", coords, ref.dN)
    if ref.dim == 1:
        detJ = J[..., 0, 0]
        Jinv = 1.0 / np.where(detJ == 0.0, np.inf, detJ)
        Jinv = Jinv[..., None, None]
    else:
        detJ = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        Jinv = np.empty_like(J)
        safe = np.where(detJ == 0.0, np.inf, detJ)
        Jinv[..., 0, 0] = J[..., 1, 1] / safe
        Jinv[..., 1, 1] = J[..., 0, 0] / safe
        Jinv[..., 0, 1] = -J[..., 0, 1] / safe
        Jinv[..., 1, 0] = -J[..., 1, 0] / safe
    if np.any(detJ <= 0.0):
        bad = int(np.argmax(np.any(detJ <= 0.0, axis=1)))
        raise InvertedElementError(f"non-positive Jacobian determinant in element {bad}")
    grad = np.einsum("qaj,eqji->eqai", ref.dN, Jinv)
    x = np.einsum("qa,eai->eqi", ref.N, coords)
    wdet = detJ * ref.weights[None, :]
    geo = ElementGeometry(x, grad, detJ, wdet)
    if single:
        return ElementGeometry(x[0], grad[0], detJ[0], wdet[0])
    return geo


class DofMap:
    """Equation numbering for the nodal unknowns of one field.

    ``eq[i]`` is the equation index of node ``i`` or -1 when the node is
    Dirichlet-constrained; ``values[i]`` holds the prescribed value (zero
    on free nodes).
    """

    def __init__(self, n_nodes, dirichlet_nodes, dirichlet_values):
        dirichlet_nodes = np.asarray(dirichlet_nodes, dtype=np.int64)
        self.n_nodes = int(n_nodes)
        self.constrained = np.zeros(self.n_nodes, dtype=bool)
        self.constrained[dirichlet_nodes] = True
        self.values = np.zeros(self.n_nodes)
        self.values[dirichlet_nodes] = dirichlet_values
        self.free = np.flatnonzero(~self.constrained)
        self.fixed = np.flatnonzero(self.constrained)
        self.eq = np.full(self.n_nodes, -1, dtype=np.int64)
        self.eq[self.free] = np.arange(self.free.size)

    @property
    def n_free(self):
        return self.free.size

    def expand(self, u_free):
        """Full nodal vector from free values plus prescribed values."""
        u = self.values.copy()
        u[self.free] = u_free
        return u

    def homogeneous(self):
        return DofMap(self.n_nodes, self.fixed, 0.0)


def build_dofmap(mesh, dirichlet, homogeneous=False):
    """Dof map from per-side Dirichlet data.

    ``dirichlet`` maps a boundary tag to a constant or a callable of the
    node coordinates. Sides missing from ``dirichlet`` stay free (natural
    condition). With ``homogeneous=True`` the same nodes are constrained to 0.
    """
    nodes, values = [], []
    for tag, value in dirichlet.items():
        if tag not in mesh.boundary:
            raise FESpaceError(f"mesh of kind {mesh.kind!r} has no boundary tag {tag!r}")
        ids = mesh.boundary[tag]
        if callable(value):
            v = np.broadcast_to(np.asarray(value(mesh.nodes[ids]), dtype=float), ids.shape)
        else:
            v = np.full(ids.shape, float(value))
        nodes.append(ids)
        values.append(v)
    if not nodes:
        return DofMap(mesh.n_nodes, np.zeros(0, dtype=np.int64), np.zeros(0))
    nodes = np.concatenate(nodes)
    values = np.concatenate(values)
    if homogeneous:
        values = np.zeros_like(values)
    # shared corner nodes: the last listed side wins, deterministically
    return DofMap(mesh.n_nodes, nodes, values)
