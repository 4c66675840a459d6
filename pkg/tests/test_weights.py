import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from muckfem.errors import NonIntegrable
from muckfem.weights import (
    Ball,
    BallFamily,
    Weight,
    check_strong_doubling,
    dual_weight_identity,
    estimate_ap_constant,
    muckenhoupt_ratio,
    sample_balls,
    weighted_measure,
)

SLOW = settings(max_examples=25, deadline=None)


def test_constant_weight_measure_is_volume():
    assert weighted_measure(Weight.constant(1), Ball((0.3,), 0.5)) == pytest.approx(1.0, rel=1e-14)
    assert weighted_measure(Weight.constant(2), Ball((0, 0), 1)) == pytest.approx(math.pi, rel=1e-14)


def test_sqrt_weight_centered_interval():
    # int_{-1}^{1} |x|^(1/2) dx = 4/3
    assert weighted_measure(Weight.power([0.0], 0.5), Ball((0.0,), 1.0)) == pytest.approx(4 / 3, rel=1e-12)


@pytest.mark.parametrize("center", [(0.3, 0.1), (2.0, 0.1), (0.0, 0.0)])
def test_power_weight_disc_matches_dblquad(center):
    w = Weight.power([0.0, 0.0], 0.5)
    ball = Ball(center, 0.5)
    cx, cy = center

    def f(y, x):
        return math.hypot(x, y) ** 0.5

    ref = integrate.dblquad(
        f, cx - 0.5, cx + 0.5,
        lambda x: cy - math.sqrt(max(0.25 - (x - cx) ** 2, 0.0)),
        lambda x: cy + math.sqrt(max(0.25 - (x - cx) ** 2, 0.0)),
        epsabs=1e-13, epsrel=1e-12,
    )[0]
    assert weighted_measure(w, ball) == pytest.approx(ref, rel=1e-8)


def test_extension_weight_disc_matches_dblquad():
    w = Weight.extension(-0.5, 2)
    ball = Ball((0.3, 0.1), 0.5)
    assert weighted_measure(w, ball) == pytest.approx(_extension_reference(), rel=1e-8)


def _extension_reference():
    # integrate over y first, splitting at the singular line y = 0
    def column(x):
        half = math.sqrt(max(0.25 - (x - 0.3) ** 2, 0.0))
        lo, hi = 0.1 - half, 0.1 + half
        g = lambda y: abs(y) ** -0.5
        if lo < 0 < hi:
            return 2 * math.sqrt(-lo) + 2 * math.sqrt(hi)
        return integrate.quad(g, lo, hi, epsabs=1e-14)[0]

    return integrate.quad(column, -0.2, 0.8, epsabs=1e-13, limit=200)[0]


def test_nonintegrable_power_raises():
    with pytest.raises(NonIntegrable):
        weighted_measure(Weight.power([0.0], -1.5), Ball((0.0,), 1.0))


def test_centered_ratio_sqrt_weight():
    # (2/3 r^(1/2)) * (2 r^(-1/2)) = 4/3 on every centered ball
    w = Weight.power([0.0], 0.5)
    for r in (1.0, 1e-3, 7.0):
        assert muckenhoupt_ratio(w, 2, Ball((0.0,), r)) == pytest.approx(4 / 3, rel=1e-10)


@SLOW
@given(
    c=st.floats(-3, 3),
    r=st.floats(1e-3, 2.0),
    t=st.floats(-0.9, 0.9),
    p=st.floats(1.5, 4.0),
)
def test_ratio_at_least_one(c, r, t, p):
    # exponents inside the A_p range (-1, p-1)
    g = t if t < 0 else t * (p - 1)
    w = Weight.power([0.0], g)
    assert muckenhoupt_ratio(w, p, Ball((c,), r)) >= 1 - 1e-8


@SLOW
@given(r=st.floats(1e-3, 10.0), t=st.floats(0.1, 10.0), g=st.floats(-0.9, 2.0))
def test_power_weight_homogeneity(r, t, g):
    w = Weight.power([0.0, 0.0], g)
    a = weighted_measure(w, Ball((0.0, 0.0), r))
    b = weighted_measure(w, Ball((0.0, 0.0), t * r))
    assert b == pytest.approx(t ** (2 + g) * a, rel=1e-9)


@pytest.mark.parametrize("w", [Weight.constant(1), Weight.power([0.0], 0.5), Weight.dirac_log([0.0, 0.0], 1.0)])
def test_dual_identity_on_sampled_balls(w):
    for b in sample_balls(w.dim, 10, seed=3, anchors=w.anchors()):
        lhs, rhs = dual_weight_identity(w, 2.0, b)
        assert lhs == pytest.approx(rhs, rel=1e-8)


def test_divergence_flag_follows_exponent_range():
    for g in (-1.5, -0.5, 0.5, 0.9, 1.1, 1.5):
        est = estimate_ap_constant(Weight.power([0.0], g), 2.0)
        assert est.divergent == (not -1 < g < 1)


def test_strong_doubling_holds_for_nested_balls():
    w = Weight.power([0.0, 0.0], 0.5)
    B = Ball((0.0, 0.0), 1.0)
    for E in (Ball((0.5, 0.0), 0.1), Ball((0.0, 0.0), 0.01), Ball((0.0, 0.9), 0.05)):
        lhs, rhs = check_strong_doubling(w, 2.0, E, B)
        assert lhs <= rhs


def test_strong_doubling_rejects_non_nested():
    with pytest.raises(ValueError):
        check_strong_doubling(Weight.constant(1), 2.0, Ball((3.0,), 0.1), Ball((0.0,), 1.0), constant=1.0)


def test_weight_config_roundtrip():
    for w in (Weight.power([0.5, 0.5], 0.5), Weight.extension(-0.5, 2), Weight.dirac_log([0.5, 0.5], 2.0),
              Weight.product(Weight.power([0.0], 0.3), Weight.power([1.0], 0.2))):
        assert Weight.from_config(w.to_config()) == w


def test_raised_and_reciprocal():
    w = Weight.power([0.0], 0.5)
    x = np.array([[0.25], [4.0]])
    np.testing.assert_allclose(w.raised(-2.0)(x), w(x) ** -2.0)
    np.testing.assert_allclose(w.reciprocal()(x), 1.0 / w(x))


def test_compose_affine_evaluates_shifted_weight():
    w = Weight.power([0.5, 0.5], 0.5)
    v = w.compose_affine(2.0, (0.1, -0.2))
    x = np.array([[0.3, 0.4], [0.0, 1.0]])
    np.testing.assert_allclose(v(x), w(2.0 * x + np.array([0.1, -0.2])), rtol=1e-13)


def test_ball_family_is_deterministic():
    w = Weight.power([0.0], 0.5)
    assert list(BallFamily().balls(w)) == list(BallFamily().balls(w))
