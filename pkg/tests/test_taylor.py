import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from muckfem.mesh import build_simplicial, build_tensor, refine_uniform
from muckfem.quadrature import SmoothFunction
from muckfem.taylor import (
    Bump,
    averaged_taylor,
    derivative_commutes,
    local_error,
    mollifier,
    mollifier_mass,
    monomials,
    node_bump,
    poincare_probe,
    taylor_poly,
)
from muckfem.weights import Weight


def _poly_expr(coeffs, dim, deg):
    names = ("x", "y")[:dim]
    terms = []
    for c, a in zip(coeffs, monomials(dim, deg)):
        mono = "*".join(f"{n}**{k}" for n, k in zip(names, a) if k) or "1"
        terms.append(f"({c!r})*{mono}")
    return " + ".join(terms) + (" + 0*x" if dim == 1 else " + 0*x + 0*y")


def _interval_node():
    m = build_simplicial((-1, 1), 0.25)
    return m, int(np.argmin(np.abs(m.nodes[:, 0])))


def _square_node():
    m = refine_uniform(build_simplicial("unit-square", 0.5))
    return m, int(np.argmin(np.linalg.norm(m.nodes - 0.5, axis=1)))


def test_mollifier_support_and_sign():
    x = np.linspace(-2, 2, 401)[:, None]
    v = mollifier(x)
    assert np.all(v >= 0)
    assert np.all(v[np.abs(x[:, 0]) >= 1] == 0)


@pytest.mark.parametrize("dim", [1, 2])
def test_bump_has_unit_mass(dim):
    # Monte-Carlo free check: midpoint sum on a fine grid
    b = Bump(dim, 0.3)
    n = 2001 if dim == 1 else 801
    g = np.linspace(-0.3, 0.3, n)
    h = g[1] - g[0]
    if dim == 1:
        total = np.sum(b(g[:, None])) * h
    else:
        X, Y = np.meshgrid(g, g)
        total = np.sum(b(np.column_stack([X.ravel(), Y.ravel()]))) * h * h
    assert total == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("make", [_interval_node, _square_node])
def test_rescaled_bump_normalized_and_inside_star(make):
    mesh, z = make()
    b = node_bump(mesh, z, 1)
    b.verify_support()
    assert b.rule.sums(b.rule.psi)[0] == pytest.approx(1.0, abs=1e-10)
    assert b.rule.mass[0] == pytest.approx(mollifier_mass(mesh.dim), rel=1e-10)


def test_taylor_poly_examples():
    v = SmoothFunction.from_expression("sin(x)")
    p = taylor_poly(v, (0.0,), 1).as_dict()
    assert p[(0,)] == pytest.approx(0.0) and p[(1,)] == pytest.approx(1.0)
    e = taylor_poly(SmoothFunction.from_expression("exp(x)"), (0.0,), 2).as_dict()
    assert [e[(k,)] for k in range(3)] == pytest.approx([1.0, 1.0, 0.5])


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2), st.lists(st.floats(-3, 3), min_size=6, max_size=6), st.sampled_from(["derivative", "parts"]))
def test_averaged_taylor_reproduces_polynomials_2d(m, coeffs, route):
    mesh, z = _square_node()
    expr = _poly_expr(coeffs[: len(monomials(2, m))], 2, m)
    v = SmoothFunction.from_expression(expr, dim=2)
    q = averaged_taylor(v, mesh, z, m, route=route)
    pts = mesh.nodes[mesh.elements[mesh.node_elements[z]]].reshape(-1, 2)
    np.testing.assert_allclose(q(pts), v(pts), atol=1e-9 * (1 + max(map(abs, coeffs))))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2), st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_averaged_taylor_reproduces_polynomials_1d(m, coeffs):
    mesh, z = _interval_node()
    v = SmoothFunction.from_expression(_poly_expr(coeffs[: m + 1], 1, m), dim=1)
    for route in ("derivative", "parts"):
        q = averaged_taylor(v, mesh, z, m, route=route)
        x = np.linspace(-0.25, 0.25, 7)[:, None]
        np.testing.assert_allclose(q(x), v(x), atol=1e-9 * (1 + max(map(abs, coeffs))))


def test_tensor_reproduction_anisotropic():
    t = build_tensor([np.linspace(0, 1, 5), np.linspace(0, 1, 9) ** 2])
    z = int(np.argmin(np.linalg.norm(t.nodes - [0.5, 0.25], axis=1)))
    v = SmoothFunction.from_expression("1 + x + 2*y")
    q = averaged_taylor(v, t, z, 1)
    x = t.nodes[[z]]
    assert q(x)[0] == pytest.approx(v(x)[0], abs=1e-12)


@pytest.mark.parametrize("alpha", [(1, 0), (0, 1), (1, 1), (0, 2)])
def test_derivative_commutes(alpha):
    mesh, z = _square_node()
    v = SmoothFunction.from_expression("exp(x)*cos(2*y)", max_order=4)
    lhs, rhs = derivative_commutes(v, mesh, z, 2, alpha)
    a, b = lhs.as_dict(), rhs.recentered(lhs.center).as_dict()
    for key in set(a) | set(b):
        assert a.get(key, 0.0) == pytest.approx(b.get(key, 0.0), abs=1e-8)


def test_local_error_rate_power_weight():
    v = SmoothFunction.from_expression("exp(x)", max_order=4)
    w = Weight.power([0.0], 0.5)
    hs, ratios = [], []
    for j in range(3, 7):
        mesh = build_simplicial((-1, 1), 2.0**-j)
        z = int(np.argmin(np.abs(mesh.nodes[:, 0])))
        e, s, h = local_error(v, mesh, z, 1, 0, w, 2)
        hs.append(h)
        ratios.append(e / s)
    slope = np.polyfit(np.log(hs), np.log(ratios), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.2)


def test_poincare_ratio_scales_with_dilation():
    w = Weight.power([0.0, 0.0], 0.5)
    ratios = []
    for t in (1.0, 0.5):
        from muckfem.mesh import structured_triangulation

        mesh = structured_triangulation((-t, -t), (t, t), 4, 4)
        v = SmoothFunction.from_expression(f"(x/{t!r})**3 - 2*(y/{t!r}) + (x/{t!r})*(y/{t!r})", max_order=1)
        res = poincare_probe(mesh, w, 2.0, lambda p, t=t: mollifier(np.asarray(p) / (0.9 * t)), [v])
        ratios.append(res.ratios[0] / t)
    assert ratios[1] == pytest.approx(ratios[0], rel=1e-10)
