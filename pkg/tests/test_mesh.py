import numpy as np
import pytest

from osgs_goal.mesh import (
    MeshError, build_interval_mesh, build_lshape_mesh, build_mesh, build_square_mesh, element_diameter,
)


def test_interval_counts_and_tags():
    m = build_interval_mesh(10)
    assert m.n_nodes == 11 and m.n_elements == 10
    assert m.boundary["left"].tolist() == [0]
    assert m.boundary["right"].tolist() == [10]
    assert m.h == pytest.approx(0.1)
    assert m.measures().sum() == pytest.approx(1.0)


@pytest.mark.parametrize("n", [2, 3, 10])
def test_square_counts_area_orientation(n):
    m = build_square_mesh(n)
    assert m.n_nodes == (n + 1) ** 2 and m.n_elements == n * n
    area = m.measures()
    assert np.all(area > 0)
    assert area.sum() == pytest.approx(1.0)
    for tag in ("left", "right", "bottom", "top"):
        assert len(m.boundary[tag]) == n + 1
    assert m.h == pytest.approx(np.sqrt(2) / n)


def test_square_row_major():
    m = build_square_mesh(3)
    assert np.allclose(m.nodes[:4, 0], [0, 1 / 3, 2 / 3, 1])
    assert np.allclose(m.nodes[:4, 1], 0)


@pytest.mark.parametrize("n", [4, 8, 16])
def test_lshape(n):
    m = build_lshape_mesh(n)
    assert m.n_elements == 3 * n * n // 4
    assert m.measures().sum() == pytest.approx(0.75)
    # no element inside the removed quadrant
    c = m.element_coords().mean(axis=1)
    assert not np.any((c[:, 0] > 0.5) & (c[:, 1] < 0.5))
    # every node is used
    assert np.unique(m.elements).size == m.n_nodes
    assert m.boundary_nodes.size == 4 * n
    re = m.nodes[m.boundary["reentrant"]]
    assert np.all(np.isclose(re[:, 0], 0.5) | np.isclose(re[:, 1], 0.5))


def test_lshape_needs_even_n():
    with pytest.raises(MeshError):
        build_lshape_mesh(5)


@pytest.mark.parametrize("bad", [0, 1, -3, 2.5, True])
def test_bad_sizes(bad):
    with pytest.raises(MeshError):
        build_square_mesh(bad)


def test_unknown_kind():
    with pytest.raises(MeshError):
        build_mesh("disk", 4)


def test_deterministic_and_readonly():
    a, b = build_lshape_mesh(8), build_lshape_mesh(8)
    assert np.array_equal(a.nodes, b.nodes) and np.array_equal(a.elements, b.elements)
    with pytest.raises(ValueError):
        a.nodes[0, 0] = 3.0


def test_h_definitions():
    m = build_square_mesh(4)
    assert m.h == pytest.approx(np.sqrt(2) / 4)
    assert m.with_h_definition("edge").h == pytest.approx(0.25)
    with pytest.raises(MeshError):
        build_square_mesh(4, h_definition="area")


def test_element_diameter():
    assert element_diameter([[0, 0], [1, 0], [1, 1], [0, 1]]) == pytest.approx(np.sqrt(2))
    assert element_diameter([0.2, 0.5]) == pytest.approx(0.3)
    with pytest.raises(MeshError):
        element_diameter([[0, 0], [0, 0]])
