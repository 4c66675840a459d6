import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from muckfem.errors import UnsupportedPair
from muckfem.interp import (
    FEFunction,
    FESpace,
    check_pair,
    compatibility_probe,
    different_metrics_error,
    global_error,
    local_error_table,
    nodal_interpolant,
    quasi_interpolate,
    stability_table,
)
from muckfem.mesh import build_simplicial, build_tensor, refine_uniform
from muckfem.quadrature import SmoothFunction
from muckfem.weights import Weight


def test_space_sizes():
    sq = build_simplicial("unit-square", 0.5)
    assert FESpace(sq, 1).num_dofs == sq.num_nodes
    line = build_simplicial((0, 1), 0.25)
    assert FESpace(line, 2).num_dofs == 9


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_quasi_interpolant_reproduces_linear_in_interior(a, b, c):
    mesh = refine_uniform(build_simplicial("unit-square", 0.5))
    space = FESpace(mesh, 1)
    v = SmoothFunction.from_expression(f"({a!r}) + ({b!r})*x + ({c!r})*y", dim=2)
    F = quasi_interpolate(v, space)
    inner = space.interior
    np.testing.assert_allclose(F.coeffs[inner], v(space.coords[inner]), atol=1e-9 * (1 + abs(a) + abs(b) + abs(c)))
    assert np.all(F.coeffs[space.boundary] == 0.0)


def test_p2_interval_reproduces_quadratic_inside():
    mesh = build_simplicial((0, 1), 0.125)
    space = FESpace(mesh, 2)
    v = SmoothFunction.from_expression("1 + x - 3*x**2")
    F = quasi_interpolate(v, space)
    np.testing.assert_allclose(F.coeffs[space.interior], v(space.coords[space.interior]), atol=1e-10)


def test_nodal_interpolant_and_arithmetic():
    mesh = build_simplicial((0, 1), 0.25)
    space = FESpace(mesh, 1)
    F = nodal_interpolant(SmoothFunction.from_expression("x"), space)
    G = F + F * 2.0
    x = np.array([[0.3], [0.9]])
    np.testing.assert_allclose(G(x), 3 * x[:, 0])


def test_fe_gradient_component_order():
    mesh = build_simplicial("unit-square", 0.5)
    F = nodal_interpolant(SmoothFunction.from_expression("2*x - 5*y"), FESpace(mesh, 1))
    np.testing.assert_allclose(F.gradient(np.array([[0.3, 0.6]])), [[2.0, -5.0]], atol=1e-13)


def test_q1_tensor_rates_along_refined_axis():
    v = SmoothFunction.from_expression("sin(pi*x)", dim=2)
    errs = []
    for nx in (8, 16, 32):
        mesh = build_tensor([np.linspace(0, 1, nx + 1), np.linspace(0, 1, 9)])
        F = quasi_interpolate(v, FESpace(mesh, 1))
        c = mesh.element_vertices.mean(axis=1)
        inside = np.flatnonzero((c[:, 1] > 0.25) & (c[:, 1] < 0.75))
        errs.append(global_error(v, F, Weight.constant(2), 2, 1, elements=inside)[1])
    assert np.log2(errs[0] / errs[1]) == pytest.approx(1.0, abs=0.1)
    assert np.log2(errs[1] / errs[2]) == pytest.approx(1.0, abs=0.1)


def test_local_table_and_csv():
    mesh = build_simplicial("unit-square", 0.25)
    v = SmoothFunction.from_expression("sin(pi*x)*sin(pi*y)")
    F = quasi_interpolate(v, FESpace(mesh, 1))
    table = local_error_table(v, F, Weight.power([0.5, 0.5], 0.5), 2, 1)
    assert len(table.rows()) == mesh.num_elements
    assert np.all(np.isfinite(table.ratio[table.interior]))
    buf = io.StringIO()
    table.to_csv(buf)
    assert buf.getvalue().count("\n") == mesh.num_elements + 1


def test_stability_bounded():
    mesh = build_simplicial("unit-square", 0.25)
    v = SmoothFunction.from_expression("exp(x)*y")
    F = quasi_interpolate(v, FESpace(mesh, 1))
    r = stability_table(v, F, Weight.constant(2), 2, 1)
    assert np.all(np.isfinite(r)) and r.max() < 50


def test_pair_check():
    p = Weight.power([0.5, 0.5], 0.5)
    assert check_pair(Weight.constant(2), Weight.constant(2)) == "unweighted"
    assert check_pair(p, p) == "power"
    with pytest.raises(UnsupportedPair):
        check_pair(p, Weight.constant(2))


def test_different_metrics_same_power():
    mesh = build_simplicial("unit-square", 0.25)
    v = SmoothFunction.from_expression("sin(pi*x)*sin(pi*y)")
    F = quasi_interpolate(v, FESpace(mesh, 1))
    w = Weight.power([0.5, 0.5], 0.5)
    t = different_metrics_error(v, F, w, 3.0, w, 2.0, 0)
    assert t.total_error > 0 and np.isfinite(t.max_ratio)
    with pytest.raises(ValueError):
        different_metrics_error(v, F, w, 1.5, w, 2.0, 0)


def test_compatibility_probe_unweighted_equals_one():
    # (r/R)^(1 + n/q - n/p) with q = p is r/R <= 1, attained at r = R
    val = compatibility_probe(Weight.constant(2), 2.0, Weight.constant(2), 2.0, (0.0, 0.0), [0.1, 0.2, 0.4])
    assert val == pytest.approx(1.0, rel=1e-12)


def test_fe_function_shape_check():
    space = FESpace(build_simplicial((0, 1), 0.5), 1)
    with pytest.raises(ValueError):
        FEFunction(space, np.zeros(7))


def test_node_value_dump():
    space = FESpace(build_simplicial((0, 1), 0.5), 1)
    F = FEFunction(space, np.array([0.0, 1.5, 0.0]))
    buf = io.StringIO()
    F.dump(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "dof,x,value"
    assert lines[2] == "1,0.5,1.5"
