import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from muckfem.errors import PointOutsideMesh, UnsupportedDomain
from muckfem.mesh import (
    build_simplicial,
    build_tensor,
    graded_partition,
    refine_uniform,
    shape_diagnostics,
    structured_triangulation,
)


def test_interval_counts():
    m = build_simplicial((0, 1), 0.25)
    assert (m.num_elements, m.num_nodes) == (4, 5)
    assert m.boundary.sum() == 2


def test_square_counts_and_refinement():
    m = build_simplicial("unit-square", math.sqrt(2) / 2)
    assert m.num_elements == 8
    r = refine_uniform(refine_uniform(m))
    assert r.num_elements == 16 * 8
    r.check_conforming()


def test_shape_coefficient_structured_mesh():
    # diameter sqrt(2) h over inscribed diameter (2 - sqrt(2)) h
    m = build_simplicial("unit-square", 0.2)
    sigma, _ = shape_diagnostics(m)
    assert sigma == pytest.approx(1 + math.sqrt(2), rel=1e-12)
    assert shape_diagnostics(refine_uniform(m))[0] == pytest.approx(sigma, rel=1e-12)


def test_refinement_preserves_measure():
    m = structured_triangulation((0.0, 0.0), (2.0, 1.0), 3, 2)
    assert refine_uniform(m).measures.sum() == pytest.approx(2.0, rel=1e-14)
    assert refine_uniform(m).max_h == pytest.approx(m.max_h / 2)


def test_star_and_patch_consistency():
    m = build_simplicial("unit-square", 0.3)
    for z in range(m.num_nodes):
        star = m.star(z)
        for e in range(m.num_elements):
            assert (e in set(star.elements)) == (z in set(m.elements[e]))
    e = 5
    patch = set(m.patch(e))
    expected = set().union(*(set(m.star(z).elements) for z in m.elements[e]))
    assert patch == expected


def test_graded_partition_law():
    g = graded_partition(2.0, 8, 3.5)
    k = np.arange(9)
    np.testing.assert_allclose(g.points, (k / 8) ** 3.5 * 2.0)
    assert g.refined().intervals == 16


def test_tensor_mesh_sizes():
    m = build_tensor([np.linspace(0, 1, 5), [0.0, 0.1, 1.0]])
    assert m.num_elements == 8
    assert set(np.round(m.sizes[:, 1], 12)) == {0.1, 0.9}
    sigma, weak = shape_diagnostics(m)
    assert weak == pytest.approx(9.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_locate_returns_containing_element(x, y):
    m = build_simplicial("unit-square", 0.3)
    e = m.locate(np.array([[x, y]]))[0]
    v = m.element_vertices[e]
    # barycentric coordinates are nonnegative up to rounding
    T = np.column_stack([v[1] - v[0], v[2] - v[0]])
    lam = np.linalg.solve(T, np.array([x, y]) - v[0])
    assert lam.min() >= -1e-12 and lam.sum() <= 1 + 1e-12


def test_locate_outside_raises():
    m = build_simplicial((0, 1), 0.25)
    with pytest.raises(PointOutsideMesh):
        m.locate(np.array([[1.5]]))


def test_unknown_domain_raises():
    with pytest.raises(UnsupportedDomain):
        build_simplicial("L-shape", 0.1)


def test_dump_lists_nodes_and_elements():
    m = build_simplicial((0, 1), 0.5)
    buf = io.StringIO()
    m.dump(buf)
    text = buf.getvalue()
    assert text.count("\n") >= m.num_nodes + m.num_elements
