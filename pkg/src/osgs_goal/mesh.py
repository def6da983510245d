"""Structured meshes: 1D intervals, unit-square quads and the L-shaped domain.

All meshes are immutable after construction. Node ordering is row-major
(x fastest) so repeated construction gives identical arrays.
"""
from dataclasses import dataclass, field

import numpy as np

BOUNDARY_TOL = 1e-12


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Mesh:
    """Nodes, connectivity and boundary tags of a degree-1 mesh.

    ``elements`` holds two node indices per element in 1D and four
    counter-clockwise indices per quad in 2D. ``boundary`` maps a side tag
    (``left``, ``right``, ``bottom``, ``top``, ``reentrant``) to a sorted
    array of node indices.
    """

    dim: int
    kind: str
    n: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary: dict = field(default_factory=dict)
    h_definition: str = "diameter"

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.elements.setflags(write=False)
        h = element_sizes(self.nodes, self.elements, self.h_definition)
        h.setflags(write=False)
        object.__setattr__(self, "h_per_element", h)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def boundary_nodes(self):
        if not self.boundary:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(list(self.boundary.values())))

    @property
    def h(self):
        return float(self.h_per_element.max())

    def element_coords(self):
        """Coordinates of element vertices, shape (n_elements, nen, dim)."""
        return self.nodes[self.elements]

    def measures(self):
        x = self.element_coords()
        if self.dim == 1:
            return x[:, 1, 0] - x[:, 0, 0]
        # shoelace formula, exact for planar quads
        xs, ys = x[..., 0], x[..., 1]
        return 0.5 * np.sum(xs * np.roll(ys, -1, axis=1) - np.roll(xs, -1, axis=1) * ys, axis=1)

    def dump_vtk(self, path):
        from .vtk import write_vtk

        write_vtk(path, self, cell_data={"h": self.h_per_element})

    def with_h_definition(self, h_definition):
        return Mesh(self.dim, self.kind, self.n, self.nodes.copy(), self.elements.copy(),
                    dict(self.boundary), h_definition)


def element_diameter(coords):
    """Diameter of one element given its vertex coordinates.

    1D: the element length. 2D: the largest vertex-to-vertex distance,
    i.e. the diagonal for a rectangle.
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    diff = coords[:, None, :] - coords[None, :, :]
    d = float(np.sqrt((diff ** 2).sum(axis=-1)).max())
    if not d > 0.0:
        raise MeshError("degenerate element: zero diameter")
    return d


def element_sizes(nodes, elements, h_definition="diameter"):
    x = nodes[elements]
    if h_definition == "diameter":
        diff = x[:, :, None, :] - x[:, None, :, :]
        h = np.sqrt((diff ** 2).sum(axis=-1)).max(axis=(1, 2))
    elif h_definition == "edge":
        h = np.linalg.norm(np.roll(x, -1, axis=1) - x, axis=-1).max(axis=1)
    else:
        raise MeshError(f"unknown h-definition {h_definition!r}")
    if np.any(h <= 0.0):
        raise MeshError("degenerate element: zero diameter")
    return h


def _check_n(n, minimum=2):
    if isinstance(n, bool) or int(n) != n or n < minimum:
        raise MeshError(f"mesh divisions must be an integer >= {minimum}, got {n!r}")
    return int(n)


def build_interval_mesh(n, h_definition="diameter"):
    """Uniform partition of (0, 1) into ``n`` intervals."""
    n = _check_n(n)
    nodes = (np.arange(n + 1, dtype=float) / n)[:, None]
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)]).astype(np.int64)
    boundary = {"left": np.array([0]), "right": np.array([n])}
    return Mesh(1, "interval", n, nodes, elements, boundary, h_definition)


def _grid(n):
    t = np.arange(n + 1, dtype=float) / n
    X, Y = np.meshgrid(t, t)  # row-major: x varies fastest
    return np.column_stack([X.ravel(), Y.ravel()])


def _quads(n, keep=None):
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    if keep is not None:
        mask = keep(i, j)
        i, j = i[mask], j[mask]
    n0 = j * (n + 1) + i
    return np.column_stack([n0, n0 + 1, n0 + n + 2, n0 + n + 1]).astype(np.int64)


def _side_tags(nodes, sides):
    x, y = nodes[:, 0], nodes[:, 1]
    tags = {}
    for name, test in sides.items():
        tags[name] = np.flatnonzero(test(x, y))
    return tags


def _near(v, c):
    return np.abs(v - c) <= BOUNDARY_TOL


def build_square_mesh(n, h_definition="diameter"):
    """``n`` x ``n`` bilinear quads on the unit square."""
    n = _check_n(n)
    nodes = _grid(n)
    elements = _quads(n)
    boundary = _side_tags(nodes, {
        "left": lambda x, y: _near(x, 0.0),
        "right": lambda x, y: _near(x, 1.0),
        "bottom": lambda x, y: _near(y, 0.0),
        "top": lambda x, y: _near(y, 1.0),
    })
    return Mesh(2, "square", n, nodes, elements, boundary, h_definition)


def build_lshape_mesh(n, h_definition="diameter"):
    """Uniform quads on (0,1)^2 minus [0.5,1]x[0,0.5], ``n`` divisions per unit edge.

    Nodes of the full grid that touch no kept element are removed and the
    remaining indices compacted, preserving row-major order.
    """
    n = _check_n(n, minimum=4)
    if n % 2:
        raise MeshError(f"L-shape needs an even number of divisions, got {n}")
    half = n // 2
    full_nodes = _grid(n)
    elements = _quads(n, keep=lambda i, j: ~((i >= half) & (j < half)))
    used = np.zeros(full_nodes.shape[0], dtype=bool)
    used[elements.ravel()] = True
    new_index = np.cumsum(used) - 1
    nodes = full_nodes[used]
    elements = new_index[elements]
    boundary = _side_tags(nodes, {
        "left": lambda x, y: _near(x, 0.0),
        "right": lambda x, y: _near(x, 1.0) & (y >= 0.5 - BOUNDARY_TOL),
        "bottom": lambda x, y: _near(y, 0.0) & (x <= 0.5 + BOUNDARY_TOL),
        "top": lambda x, y: _near(y, 1.0),
        "reentrant": lambda x, y: (_near(x, 0.5) & (y <= 0.5 + BOUNDARY_TOL))
        | (_near(y, 0.5) & (x >= 0.5 - BOUNDARY_TOL)),
    })
    return Mesh(2, "lshape", n, nodes, elements, boundary, h_definition)


def build_mesh(kind, n, h_definition="diameter"):
    builders = {
        "interval": build_interval_mesh,
        "square": build_square_mesh,
        "lshape": build_lshape_mesh,
    }
    try:
        builder = builders[kind]
    except KeyError:
        raise MeshError(f"unknown domain kind {kind!r}") from None
    return builder(n, h_definition)
