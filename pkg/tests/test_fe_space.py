import numpy as np
import pytest

from osgs_goal.fe_space import (
    FESpaceError, InvertedElementError, build_dofmap, map_to_physical, quadrature_rule, reference_element,
    shape_functions,
)
from osgs_goal.mesh import build_lshape_mesh, build_square_mesh


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("p", [1, 2, 3, 4, 5])
def test_partition_of_unity(dim, p):
    ref = reference_element(dim, p)
    assert np.max(np.abs(ref.N.sum(axis=1) - 1.0)) <= 1e-14
    assert np.max(np.abs(ref.dN.sum(axis=1))) <= 1e-14


def test_physical_gradients_sum_to_zero():
    m = build_lshape_mesh(8)
    geo = map_to_physical(m.element_coords(), reference_element(2, 3))
    assert np.max(np.abs(geo.grad.sum(axis=2))) <= 1e-12  # scaled by 1/h = 8


@pytest.mark.parametrize("p", [1, 2, 3, 4, 5])
def test_quadrature_exactness(p):
    pts, w = quadrature_rule(p, 2)
    for deg in range(2 * p):
        exact = 2.0 / (deg + 1) if deg % 2 == 0 else 0.0
        assert np.sum(w * pts[:, 0] ** deg) == pytest.approx(2 * exact, abs=1e-14)
        assert np.sum(w * pts[:, 1] ** deg) == pytest.approx(2 * exact, abs=1e-14)


def test_quadrature_bad_order():
    with pytest.raises(FESpaceError):
        quadrature_rule(0)
    with pytest.raises(FESpaceError):
        quadrature_rule(2, dim=3)


def test_nodal_interpolation():
    verts = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)
    N, _ = shape_functions(verts, 2)
    assert np.allclose(N, np.eye(4))


def test_affine_map_reproduces_linear_fields():
    coords = np.array([[0.0, 0.0], [2.0, 0.5], [2.5, 2.0], [0.2, 1.5]])
    ref = reference_element(2, 2)
    geo = map_to_physical(coords, ref)
    u = 3 * coords[:, 0] - 2 * coords[:, 1] + 1
    g = np.einsum("qai,a->qi", geo.grad, u)
    assert np.allclose(g, [3, -2])
    # shoelace area
    area = 0.5 * abs(np.dot(coords[:, 0], np.roll(coords[:, 1], -1)) - np.dot(np.roll(coords[:, 0], -1), coords[:, 1]))
    assert geo.wdet.sum() == pytest.approx(area)


def test_inverted_element():
    coords = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]])  # clockwise
    with pytest.raises(InvertedElementError):
        map_to_physical(coords, reference_element(2, 2))


def test_dofmap():
    m = build_square_mesh(4)
    dm = build_dofmap(m, {"left": 0.0, "right": lambda x: 1.0 + x[:, 1]})
    assert dm.n_free == 25 - 10
    u = dm.expand(np.arange(dm.n_free, dtype=float))
    right = m.boundary["right"]
    assert np.allclose(u[right], 1 + m.nodes[right, 1])
    assert np.all(dm.eq[dm.fixed] == -1)
    z = build_dofmap(m, {"left": 0.0, "right": 1.0}, homogeneous=True)
    assert np.all(z.values == 0) and np.array_equal(z.fixed, dm.fixed)


def test_dofmap_unknown_tag():
    with pytest.raises(FESpaceError):
        build_dofmap(build_square_mesh(2), {"reentrant": 0.0})
