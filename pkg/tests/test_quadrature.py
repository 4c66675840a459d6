import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from muckfem.errors import DerivativeUnavailable, UnsupportedWeight
from muckfem.interp import FESpace, nodal_interpolant
from muckfem.mesh import build_simplicial, build_tensor, refine_uniform
from muckfem.quadrature import (
    SmoothFunction,
    build_rule,
    gauss_jacobi01,
    multi_indices,
    reference_rule,
    weighted_lp_norm,
    weighted_seminorm,
)
from muckfem.weights import Weight


def test_two_point_gauss_for_degree_three():
    pts, wts = reference_rule("interval", 3)
    assert len(wts) == 2
    np.testing.assert_allclose(np.sort(pts[:, 0]), [0.5 - 0.5 / math.sqrt(3), 0.5 + 0.5 / math.sqrt(3)])


@pytest.mark.parametrize("shape", ["interval", "triangle", "rectangle"])
@pytest.mark.parametrize("degree", [1, 4, 9])
def test_reference_rules_exact_on_monomials(shape, degree):
    pts, wts = reference_rule(shape, degree)
    dim = pts.shape[1]
    for total in range(degree + 1):
        for a in multi_indices(dim, total):
            got = float(np.sum(wts * np.prod(pts ** np.array(a), axis=1)))
            if shape == "triangle":
                exact = math.factorial(a[0]) * math.factorial(a[1]) / math.factorial(a[0] + a[1] + 2)
            else:
                exact = float(np.prod([1.0 / (k + 1) for k in a]))
            assert got == pytest.approx(exact, rel=1e-12, abs=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.95, 3.0), st.integers(0, 6))
def test_jacobi_rule_moments(beta, k):
    x, w = gauss_jacobi01(8, beta)
    assert np.all(w > 0)
    assert np.sum(w * x**k) == pytest.approx(1.0 / (k + beta + 1), rel=1e-11)


def test_extension_weight_column_exact():
    t = build_tensor([[0.0, 1.0], [0.0, 0.3]])
    rule = build_rule(t, Weight.extension(-0.5, 2), 4)
    assert rule.integrate(np.ones(rule.num_points)) == pytest.approx(0.3**0.5 / 0.5, rel=1e-13)


def test_extension_weight_shape_function_integral():
    # int_0^h y^a (1 - y/h)^2 dy = h^(1+a) * 2 / ((1+a)(2+a)(3+a))
    a, h = -0.5, 0.3
    t = build_tensor([[0.0, 1.0], [0.0, h]])
    rule = build_rule(t, Weight.extension(a, 2), 4)
    got = rule.integrate((1 - rule.x[:, 1] / h) ** 2)
    assert got == pytest.approx(h ** (1 + a) * 2 / ((1 + a) * (2 + a) * (3 + a)), rel=1e-13)


def test_sqrt_weight_symmetric_interval():
    rule = build_rule(build_tensor([[-0.2, 0.2]]), Weight.power([0.0], 0.5), 4)
    assert rule.integrate(np.ones(rule.num_points)) == pytest.approx(4 / 3 * 0.2**1.5, rel=1e-12)


def test_power_weight_over_square_matches_dblquad():
    sq = build_simplicial("unit-square", 0.2)
    rule = build_rule(sq, Weight.power([0.5, 0.5], 0.5), 4)
    ref = integrate.dblquad(lambda y, x: math.hypot(x - 0.5, y - 0.5) ** 0.5, 0, 1, 0, 1, epsabs=1e-12)[0]
    assert rule.integrate(np.ones(rule.num_points)) == pytest.approx(ref, rel=1e-9)


def test_level_weight_on_triangles_unsupported():
    with pytest.raises(UnsupportedWeight):
        build_rule(build_simplicial("unit-square", 0.5), Weight.extension(-0.5, 2), 4)


def test_rule_weights_positive():
    rule = build_rule(build_simplicial("unit-square", 0.3), Weight.dirac_log([0.5, 0.5], math.sqrt(2)), 4)
    assert np.all(rule.wq > 0)


def test_norm_examples():
    m = build_simplicial((0, 1), 0.1)
    w = Weight.power([0.0], 0.5)
    one = SmoothFunction.from_expression("1 + 0*x", dim=1)
    assert weighted_lp_norm(one, Weight.constant(1), 2, m) == pytest.approx(1.0, rel=1e-14)
    assert weighted_lp_norm(SmoothFunction.from_expression("x"), w, 2, m) == pytest.approx(math.sqrt(2 / 7), rel=1e-11)
    sq = SmoothFunction.from_expression("x**2")
    assert weighted_seminorm(sq, w, 2, 2, m) == pytest.approx(2 * math.sqrt(2 / 3), rel=1e-11)
    assert weighted_seminorm(sq, w, 2, 0, m) == pytest.approx(weighted_lp_norm(sq, w, 2, m), rel=1e-14)


def test_gradient_seminorm_of_linear_function():
    m = build_simplicial("unit-square", 0.5)
    f = SmoothFunction.from_expression("x + y")
    assert weighted_seminorm(f, Weight.constant(2), 2, 1, m) == pytest.approx(math.sqrt(2), rel=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3), st.floats(1.2, 4.0))
def test_norm_homogeneity(c, p):
    m = build_simplicial((0, 1), 0.25)
    w = Weight.power([0.3], 0.5)
    f = SmoothFunction.from_expression("sin(3*x) + x**2")
    g = SmoothFunction.from_expression(f"{c!r}*(sin(3*x) + x**2)")
    assert weighted_lp_norm(g, w, p, m) == pytest.approx(abs(c) * weighted_lp_norm(f, w, p, m), rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.3, 0.6), st.floats(0.05, 0.4), st.floats(1.6, 3.0))
def test_holder_inequality_on_balls(center, radius, p):
    # |x|^(1/2) is A_p only for p > 3/2; below that the dual side diverges
    # int_B |u| <= ||u||_{L^p(w,B)} ||1||_{L^p'(w^(-p'/p),B)}
    lo, hi = center - radius, center + radius
    m = build_tensor([[lo, hi]])
    w = Weight.power([0.0], 0.5)
    pd = p / (p - 1)
    u = SmoothFunction.from_expression("cos(4*x) + x")
    plain = build_rule(m, Weight.constant(1), 10)
    lhs = plain.integrate(np.abs(u(plain.x)))
    rhs = weighted_lp_norm(u, w, p, m, degree=10) * weighted_lp_norm(
        SmoothFunction.from_expression("1 + 0*x", dim=1), w.raised(-pd / p), pd, m, degree=10)
    assert lhs <= rhs * (1 + 1e-10)


def test_derivative_finite_difference_consistency():
    f = SmoothFunction.from_expression("exp(x)*sin(y)", max_order=2)
    x = np.array([[0.3, 0.7]])
    h = 1e-5
    fd = (f(x + [h, 0]) - f(x - [h, 0])) / (2 * h)
    assert f.derivative_at((1, 0), x) == pytest.approx(fd, rel=1e-8)


def test_sampled_function_has_no_derivatives():
    f = SmoothFunction.sampled(lambda x: np.sin(x[:, 0]), 1)
    m = build_simplicial((0, 1), 0.5)
    with pytest.raises(DerivativeUnavailable):
        weighted_seminorm(f, Weight.constant(1), 2, 1, m)


def test_fe_function_seminorm():
    m = refine_uniform(build_simplicial((0, 1), 0.5))
    F = nodal_interpolant(SmoothFunction.from_expression("x"), FESpace(m, 1))
    assert weighted_seminorm(F, Weight.constant(1), 2, 1, m) == pytest.approx(1.0, rel=1e-13)
