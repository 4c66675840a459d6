"""Weighted quadrature on mesh elements and weighted Sobolev norms.

A rule is a flat list of points. Each point carries the index of its
element and a weight that already includes the weight function, so
``sum(f(x) * wq)`` approximates ``int f w``. Elements that touch the
singular set of the weight get a rule built around it. Power-type
singularities use Gauss-Jacobi in the singular direction. Other kinds use
dyadic panels toward the singular point.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np
import sympy as sp
from scipy.special import roots_jacobi, roots_legendre

from .errors import DerivativeUnavailable, NonIntegrable, QuadratureFailure, UnsupportedWeight
from .mesh import Mesh
from .weights import Weight

SINGULAR_ORDER = 8
ADAPTED_TANGENTIAL = 12
DYADIC_LEVELS = 40
_TOUCH = 1e-12
NEAR_DEGREE = 19
NEAR_FACTOR = 3.0


# ---------------------------------------------------------------------------
# one-dimensional building blocks on [0, 1]
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def gauss_legendre01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(n)
    return _ro(0.5 * (x + 1.0)), _ro(0.5 * w)


@lru_cache(maxsize=None)
def gauss_jacobi01(n: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights with ``sum w f(s) ~ int_0^1 s^beta f(s) ds``."""
    if beta == 0:
        return gauss_legendre01(n)
    x, w = roots_jacobi(n, 0.0, beta)
    return _ro(0.5 * (x + 1.0)), _ro(w * 2.0 ** (-1.0 - beta))


@lru_cache(maxsize=None)
def dyadic01(n: int, levels: int, jacobian_power: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss on [2^-k-1, 2^-k] panels; weights include ``s^jacobian_power``."""
    gx, gw = gauss_legendre01(n)
    xs, ws = [], []
    for k in range(levels):
        a, b = 2.0 ** (-k - 1), 2.0 ** (-k)
        xs.append(a + (b - a) * gx)
        ws.append((b - a) * gw)
    b = 2.0 ** (-levels)
    xs.append(b * gx)
    ws.append(b * gw)
    x = np.concatenate(xs)
    w = np.concatenate(ws) * x**jacobian_power
    return _ro(x), _ro(w)


def _ro(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# reference rules for unadapted elements
# ---------------------------------------------------------------------------


def points_for_degree(degree: int) -> int:
    return max(1, math.ceil((degree + 1) / 2))


@lru_cache(maxsize=None)
def reference_rule(shape: str, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule on the reference element, verified on monomials up to ``degree``.

    Reference elements: [0,1]; the triangle (0,0),(1,0),(0,1); [0,1]^2.
    """
    n = points_for_degree(degree)
    if shape == "interval":
        x, w = gauss_legendre01(n)
        pts, wts = x[:, None], w
    elif shape == "rectangle":
        x, w = gauss_legendre01(n)
        X, Y = np.meshgrid(x, x, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        wts = np.outer(w, w).ravel()
    elif shape == "triangle":
        # collapsed coordinates: (u(1-v), uv) with Jacobian u
        u, wu = gauss_jacobi01(n, 1.0)
        v, wv = gauss_legendre01(n)
        U, V = np.meshgrid(u, v, indexing="ij")
        pts = np.column_stack([(U * (1 - V)).ravel(), (U * V).ravel()])
        wts = np.outer(wu, wv).ravel()
    else:
        raise ValueError(f"unknown element shape {shape!r}")
    _verify_exactness(shape, degree, pts, wts)
    return _ro(pts), _ro(wts)


def _reference_moment(shape: str, a: tuple[int, ...]) -> float:
    if shape == "interval":
        return 1.0 / (a[0] + 1)
    if shape == "rectangle":
        return 1.0 / ((a[0] + 1) * (a[1] + 1))
    return math.factorial(a[0]) * math.factorial(a[1]) / math.factorial(a[0] + a[1] + 2)


def _verify_exactness(shape, degree, pts, wts) -> None:
    dim = pts.shape[1]
    for k in range(degree + 1):
        for a in multi_indices(dim, k):
            approx = float(np.sum(wts * np.prod(pts ** np.asarray(a), axis=1)))
            exact = _reference_moment(shape, a)
            if abs(approx - exact) > 1e-12 * max(1.0, abs(exact)):
                raise QuadratureFailure(f"{shape} rule fails on monomial {a}")


def multi_indices(dim: int, order: int) -> list[tuple[int, ...]]:
    """All multi-indices of the given total order, highest first component first."""
    out = [a for a in itertools.product(range(order + 1), repeat=dim) if sum(a) == order]
    return sorted(out, reverse=True)


# ---------------------------------------------------------------------------
# rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    mesh: Mesh | None
    weight: Weight
    degree: int
    elem: np.ndarray
    x: np.ndarray
    wq: np.ndarray
    elements: np.ndarray
    adapted: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def num_points(self) -> int:
        return len(self.wq)

    def integrate(self, values) -> float:
        return float(np.sum(np.asarray(values) * self.wq))

    def element_sums(self, values) -> np.ndarray:
        """Per-element integrals indexed by global element id."""
        n = self.mesh.num_elements if self.mesh is not None else int(self.elem.max()) + 1
        return np.bincount(self.elem, weights=np.asarray(values) * self.wq, minlength=n)


def element_shape(mesh: Mesh) -> str:
    if mesh.dim == 1:
        return "interval"
    return "rectangle" if mesh.kind == "tensor" else "triangle"


def _map_reference(shape: str, verts: np.ndarray, ref_pts: np.ndarray):
    """Physical points (E, q, d) and Jacobian determinants (E,)."""
    a = verts[:, 0]
    if shape == "interval":
        L = verts[:, 1, 0] - verts[:, 0, 0]
        return a[:, None, :] + ref_pts[None, :, :] * L[:, None, None], np.abs(L)
    if shape == "rectangle":
        size = verts[:, 2] - verts[:, 0]
        return a[:, None, :] + ref_pts[None] * size[:, None, :], size[:, 0] * size[:, 1]
    e1 = verts[:, 1] - a
    e2 = verts[:, 2] - a
    x = a[:, None, :] + ref_pts[None, :, :1] * e1[:, None, :] + ref_pts[None, :, 1:] * e2[:, None, :]
    det = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return x, det


def _touching(shape: str, verts: np.ndarray, w: Weight) -> np.ndarray:
    """Boolean mask of elements whose closure meets the weight's singular set."""
    E = len(verts)
    hit = np.zeros(E, dtype=bool)
    pts = list(w.singular_points())
    levels = list(w.singular_levels())
    if w.dim == 1:
        pts += [np.array([lv]) for lv in levels]
        levels = []
    lo = verts.min(axis=1)
    hi = verts.max(axis=1)
    scale = np.maximum(hi - lo, 1e-300).max(axis=1)
    for p in pts:
        inside_box = np.all((lo - _TOUCH * scale[:, None] <= p) & (p <= hi + _TOUCH * scale[:, None]), axis=1)
        if shape == "triangle":
            lam = _barycentric(verts, p)
            inside_box &= lam.min(axis=1) >= -_TOUCH
        hit |= inside_box
    for lv in levels:
        hit |= (lo[:, -1] - _TOUCH * scale <= lv) & (lv <= hi[:, -1] + _TOUCH * scale)
    return hit


def _near_singular(verts: np.ndarray, w: Weight) -> np.ndarray:
    """Elements within a few diameters of the singular set."""
    hit = np.zeros(len(verts), dtype=bool)
    pts = list(w.singular_points())
    levels = list(w.singular_levels())
    if not pts and not levels:
        return hit
    centroid = verts.mean(axis=1)
    diam = np.linalg.norm(verts.max(axis=1) - verts.min(axis=1), axis=1)
    for p in pts:
        hit |= np.linalg.norm(centroid - p, axis=1) < NEAR_FACTOR * diam
    for lv in levels:
        hit |= np.abs(centroid[:, -1] - lv) < NEAR_FACTOR * diam
    return hit


def _barycentric(verts: np.ndarray, p: np.ndarray) -> np.ndarray:
    a = verts[:, 0]
    e1 = verts[:, 1] - a
    e2 = verts[:, 2] - a
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    r = p - a
    l1 = (r[:, 0] * e2[:, 1] - r[:, 1] * e2[:, 0]) / det
    l2 = (e1[:, 0] * r[:, 1] - e1[:, 1] * r[:, 0]) / det
    return np.column_stack([1 - l1 - l2, l1, l2])


def build_rule(mesh: Mesh, w: Weight, degree: int, tol: float = 1e-12,
               elements: Iterable[int] | None = None) -> QuadratureRule:
    """Weighted rule over all (or the listed) elements of ``mesh``."""
    if degree < 1:
        raise ValueError("exactness degree must be at least 1")
    if w.dim != mesh.dim:
        raise ValueError("weight and mesh dimensions differ")
    key_elems = None if elements is None else tuple(int(e) for e in np.atleast_1d(elements))
    return _build_rule_cached(mesh, w, int(degree), float(tol), key_elems)


@lru_cache(maxsize=32)
def _build_rule_cached(mesh, w, degree, tol, elements) -> QuadratureRule:
    shape = element_shape(mesh)
    ids = np.arange(mesh.num_elements) if elements is None else np.asarray(elements, dtype=np.int64)
    verts = mesh.element_vertices[ids]
    special = _touching(shape, verts, w) if (w.singular_points() or w.singular_levels()) else np.zeros(len(ids), bool)

    near = _near_singular(verts, w) & ~special
    xs, wqs, els = [], [], []
    # elements next to the singular set see a steep weight: use a richer rule
    for mask, deg in ((~special & ~near, degree), (near, max(degree, NEAR_DEGREE))):
        if not mask.any():
            continue
        ref_pts, ref_w = reference_rule(shape, deg)
        x, det = _map_reference(shape, verts[mask], ref_pts)
        xs.append(x.reshape(-1, mesh.dim))
        wqs.append((det[:, None] * ref_w[None, :]).ravel())
        els.append(np.repeat(ids[mask], len(ref_w)))
    for e, vv in zip(ids[special], verts[special]):
        px, pw = region_rule(vv, w, degree, tol, shape=shape)
        xs.append(px)
        wqs.append(pw)
        els.append(np.full(len(pw), e, dtype=np.int64))
    # keep points grouped by element id for a fixed summation order
    elem = np.concatenate(els)
    order = np.argsort(elem, kind="stable")
    X = np.concatenate(xs)[order]
    WQ = np.concatenate(wqs)[order]
    elem = elem[order]
    is_adapted = np.zeros(len(WQ), dtype=bool)
    is_adapted[np.isin(elem, ids[special])] = True
    # fold the weight in; adapted points already carry it
    wvals = np.ones(len(WQ))
    wvals[~is_adapted] = w(X[~is_adapted])
    WQ = WQ * wvals
    if not np.all(np.isfinite(WQ)):
        raise QuadratureFailure("weight is not finite at a quadrature point")
    return QuadratureRule(mesh, w, degree, _ro_i(elem), _ro(X), _ro(WQ), _ro_i(ids), _ro_i(ids[special]))


def _ro_i(a) -> np.ndarray:
    a = np.array(a, dtype=np.int64)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# single-element rules (singular adaptation lives here)
# ---------------------------------------------------------------------------


def _infer_shape(v: np.ndarray) -> str:
    if v.shape[1] == 1:
        return "interval"
    if len(v) == 3:
        return "triangle"
    if len(v) == 4:
        return "rectangle"
    raise ValueError("element must be an interval, a triangle or a rectangle")


def region_rule(vertices, w: Weight, degree: int, tol: float = 1e-12, *,
                shape: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Points and weights for ``int_K f w`` on one element ``K``.

    ``vertices`` is ``(a, b)`` for an interval, a 3x2 triangle or a 4x2
    axis-aligned rectangle listed counter-clockwise.
    """
    v = np.asarray(vertices, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    shape = shape or _infer_shape(v)
    touching = bool(_touching(shape, v[None], w)[0]) if (w.singular_points() or w.singular_levels()) else False
    if not touching:
        ref_pts, ref_w = reference_rule(shape, degree)
        x, det = _map_reference(shape, v[None], ref_pts)
        x = x[0]
        wq = det[0] * ref_w
        return x, wq * w(x)
    if not w.radially_integrable():
        raise NonIntegrable(f"{w.kind} weight with exponent {w.exponent} diverges on this element")
    n = max(SINGULAR_ORDER, points_for_degree(degree))
    if shape == "interval":
        x, wq = _interval_singular(v[:, 0], w, n)
    elif w.singular_points() and _point_in(shape, v, w):
        x, wq = _fan_singular(v, w, n)
    elif w.singular_levels():
        if shape != "rectangle":
            raise UnsupportedWeight("hyperplane singularities need rectangular elements")
        x, wq = _rectangle_level(v, w, n)
    else:
        raise QuadratureFailure("could not adapt the rule to the singular set")
    if not np.all(np.isfinite(wq)):
        raise QuadratureFailure("non-finite quadrature weight")
    return x, wq


def _point_in(shape, v, w) -> bool:
    for p in w.singular_points():
        if _touching(shape, v[None], Weight.power(p, -0.5))[0]:
            return True
    return False


def _power_like(w: Weight) -> bool:
    return w.kind in ("power", "extension")


def _interval_singular(ab: np.ndarray, w: Weight, n: int) -> tuple[np.ndarray, np.ndarray]:
    a, b = float(ab.min()), float(ab.max())
    sing = [float(p[0]) for p in w.singular_points()] + list(w.singular_levels())
    inside = [p for p in sing if a - _TOUCH * (b - a) <= p <= b + _TOUCH * (b - a)]
    if len(inside) != 1:
        raise UnsupportedWeight("element must contain exactly one singular point")
    p = min(max(inside[0], a), b)
    xs, ws = [], []
    for end in (a, b):
        L = abs(end - p)
        if L <= 0:
            continue
        if _power_like(w):
            s, sw = gauss_jacobi01(n, w.exponent)
            x = p + s * (end - p)
            wq = sw * L ** (1.0 + w.exponent) * w.scale
        else:
            s, sw = dyadic01(n, DYADIC_LEVELS, 0)
            x = p + s * (end - p)
            wq = sw * L * w(x[:, None])
        xs.append(x)
        ws.append(wq)
    return np.concatenate(xs)[:, None], np.concatenate(ws)


def _fan_singular(v: np.ndarray, w: Weight, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Split the polygon into triangles with the singular point as apex."""
    pts = w.singular_points()
    p = None
    shape = "triangle" if len(v) == 3 else "rectangle"
    for cand in pts:
        if _touching(shape, v[None], Weight.power(cand, -0.5))[0]:
            if p is not None:
                raise UnsupportedWeight("element contains two singular points")
            p = np.asarray(cand, dtype=float)
    area = _polygon_area(v)
    nv = ADAPTED_TANGENTIAL
    t, tw = gauss_legendre01(max(nv, n))
    centered_power = w.kind == "power" and np.allclose(w.center, p)
    if centered_power:
        u, uw = gauss_jacobi01(n, 1.0 + w.exponent)
    else:
        u, uw = dyadic01(n, DYADIC_LEVELS, 1)
    xs, ws = [], []
    for i in range(len(v)):
        a, b = v[i], v[(i + 1) % len(v)]
        sub = 0.5 * abs((a[0] - p[0]) * (b[1] - p[1]) - (a[1] - p[1]) * (b[0] - p[0]))
        if sub <= 1e-14 * area:
            continue
        d = (1 - t)[:, None] * (a - p) + t[:, None] * (b - p)  # (nv, 2)
        x = p + u[:, None, None] * d[None, :, :]  # (nu, nv, 2)
        base = 2.0 * sub * np.outer(uw, tw)
        if centered_power:
            wq = base * w.scale * (np.linalg.norm(d, axis=1) ** w.exponent)[None, :]
        else:
            wq = base * w(x.reshape(-1, 2)).reshape(base.shape)
        xs.append(x.reshape(-1, 2))
        ws.append(wq.ravel())
    return np.concatenate(xs), np.concatenate(ws)


def _polygon_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _rectangle_level(v: np.ndarray, w: Weight, n: int) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = v.min(axis=0), v.max(axis=0)
    levels = [lv for lv in w.singular_levels() if lo[1] - _TOUCH <= lv <= hi[1] + _TOUCH]
    if len(levels) != 1:
        raise UnsupportedWeight("element meets more than one singular level")
    c = min(max(levels[0], lo[1]), hi[1])
    gx, gw = gauss_legendre01(n)
    X = lo[0] + (hi[0] - lo[0]) * gx
    WX = (hi[0] - lo[0]) * gw
    xs, ws = [], []
    for end in (lo[1], hi[1]):
        L = abs(end - c)
        if L <= 0:
            continue
        if w.kind == "extension":
            s, sw = gauss_jacobi01(n, w.exponent)
            Y = c + s * (end - c)
            wy = sw * L ** (1.0 + w.exponent) * w.scale
            pts = np.column_stack([np.repeat(X, len(Y)), np.tile(Y, len(X))])
            wq = np.outer(WX, wy).ravel()
        else:
            s, sw = dyadic01(n, DYADIC_LEVELS, 0)
            Y = c + s * (end - c)
            pts = np.column_stack([np.repeat(X, len(Y)), np.tile(Y, len(X))])
            wq = np.outer(WX, sw * L).ravel() * w(pts)
        xs.append(pts)
        ws.append(wq)
    return np.concatenate(xs), np.concatenate(ws)


# ---------------------------------------------------------------------------
# smooth functions with derivative oracles
# ---------------------------------------------------------------------------

_SYMBOLS = {1: ("x",), 2: ("x", "y")}


class SmoothFunction:
    """A function of ``dim`` variables together with its partial derivatives.

    ``derivatives`` maps multi-indices to callables on ``(P, dim)`` arrays.
    Functions built from a sympy expression differentiate symbolically on
    demand up to ``max_order``. A bare callable has ``max_order = 0`` and is
    treated as sampled data.
    """

    def __init__(self, func: Callable, dim: int, derivatives: dict | None = None,
                 max_order: int | None = None, label: str = "", expr=None):
        self.dim = dim
        self._func = func
        self._derivs = dict(derivatives or {})
        self._expr = expr
        if max_order is None:
            max_order = max((sum(k) for k in self._derivs), default=0)
        self.max_order = max_order
        self.label = label

    @classmethod
    def from_expression(cls, expr, dim: int | None = None, max_order: int = 4) -> "SmoothFunction":
        if isinstance(expr, str):
            names = ("x", "y")
            syms = sp.symbols(names, real=True)
            expr = sp.sympify(expr, locals=dict(zip(names, syms)))
        free = {s.name for s in expr.free_symbols}
        if dim is None:
            dim = 2 if "y" in free else 1
        syms = sp.symbols(_SYMBOLS[dim], real=True)
        expr = expr.subs({sp.Symbol(s.name): s for s in syms})
        fn = _lambdify(syms, expr)
        return cls(fn, dim, {(0,) * dim: fn}, max_order, label=str(expr), expr=(syms, expr))

    @classmethod
    def sampled(cls, func: Callable, dim: int) -> "SmoothFunction":
        return cls(lambda x: np.asarray(func(x), dtype=float), dim, {}, 0, label="sampled")

    @property
    def is_sampled(self) -> bool:
        return self.max_order == 0 and self._expr is None and not self._derivs

    def __call__(self, x) -> np.ndarray:
        return self.derivative_at((0,) * self.dim, x)

    def derivative(self, kappa: tuple[int, ...]) -> Callable:
        kappa = tuple(int(k) for k in kappa)
        if len(kappa) != self.dim:
            raise ValueError("multi-index length must equal the dimension")
        if sum(kappa) == 0:
            return self._derivs.get(kappa, self._func)
        if sum(kappa) > self.max_order:
            raise DerivativeUnavailable(f"derivative {kappa} exceeds order {self.max_order}")
        if kappa not in self._derivs:
            if self._expr is None:
                raise DerivativeUnavailable(f"no evaluator for derivative {kappa}")
            syms, expr = self._expr
            d = expr
            for s, k in zip(syms, kappa):
                if k:
                    d = sp.diff(d, s, k)
            self._derivs[kappa] = _lambdify(syms, d)
        return self._derivs[kappa]

    def derivative_at(self, kappa, x, elem=None) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        return np.broadcast_to(np.asarray(self.derivative(kappa)(x), dtype=float), (len(x),)).copy()

    def __repr__(self) -> str:
        return f"SmoothFunction({self.label or 'callable'}, dim={self.dim})"


def _lambdify(syms, expr) -> Callable:
    f = sp.lambdify(syms, expr, modules="numpy")
    return lambda x: f(*(np.asarray(x, dtype=float).reshape(-1, len(syms)).T))


class Difference:
    """Pointwise ``a - b`` of two fields, used for error norms."""

    def __init__(self, a, b):
        self.a, self.b = a, b
        self.dim = a.dim
        self.max_order = min(getattr(a, "max_order", 0), getattr(b, "max_order", 0))

    def derivative_at(self, kappa, x, elem=None) -> np.ndarray:
        return field_values(self.a, kappa, x, elem) - field_values(self.b, kappa, x, elem)


def as_field(f, dim: int):
    if hasattr(f, "derivative_at"):
        return f
    if callable(f):
        return SmoothFunction.sampled(f, dim)
    if isinstance(f, str):
        return SmoothFunction.from_expression(f, dim=dim)
    c = float(f)
    return SmoothFunction(lambda x: np.full(len(np.atleast_2d(x)), c), dim,
                          {(0,) * dim: lambda x: np.full(len(x), c)}, 0, label=repr(c))


def field_values(f, kappa, x, elem=None) -> np.ndarray:
    if sum(kappa) > getattr(f, "max_order", 0) and not getattr(f, "piecewise_polynomial", False):
        raise DerivativeUnavailable(f"field does not provide derivative {tuple(kappa)}")
    return f.derivative_at(tuple(kappa), x, elem)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

DEFAULT_DEGREE = 6


def _rule_for(mesh, w, rule, degree, elements):
    if rule is not None:
        return rule
    return build_rule(mesh, w, degree or DEFAULT_DEGREE, elements=elements)


def lp_power_by_element(f, w: Weight, p: float, mesh: Mesh, k: int = 0,
                        rule: QuadratureRule | None = None, degree: int | None = None,
                        elements=None) -> np.ndarray:
    """Per-element ``sum_{|kappa|=k} int_T |D^kappa f|^p w``."""
    rule = _rule_for(mesh, w, rule, degree, elements)
    f = as_field(f, mesh.dim)
    total = np.zeros(mesh.num_elements)
    for kappa in multi_indices(mesh.dim, k):
        vals = np.abs(field_values(f, kappa, rule.x, rule.elem)) ** p
        total += rule.element_sums(vals)
    return total


def weighted_lp_norm(f, w: Weight, p: float, mesh: Mesh, rule: QuadratureRule | None = None,
                     *, degree: int | None = None, elements=None) -> float:
    """``(int |f|^p w)^(1/p)`` over the mesh (or the listed elements)."""
    return weighted_seminorm(f, w, p, 0, mesh, rule, degree=degree, elements=elements)


def weighted_seminorm(f, w: Weight, p: float, k: int, mesh: Mesh,
                      rule: QuadratureRule | None = None, *, degree: int | None = None,
                      elements=None) -> float:
    """``(sum_{|kappa|=k} ||D^kappa f||^p_{L^p(w)})^(1/p)``."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    rule = _rule_for(mesh, w, rule, degree, elements)
    f = as_field(f, mesh.dim)
    total = 0.0
    for kappa in multi_indices(mesh.dim, k):
        total += rule.integrate(np.abs(field_values(f, kappa, rule.x, rule.elem)) ** p)
    return total ** (1.0 / p)


def weighted_norm(f, w: Weight, p: float, k: int, mesh: Mesh, *, degree: int | None = None,
                  elements=None) -> float:
    """Full ``W^k_p(w)`` norm: the l^p sum of the seminorms of orders 0..k."""
    return sum(
        weighted_seminorm(f, w, p, j, mesh, degree=degree, elements=elements) ** p for j in range(k + 1)
    ) ** (1.0 / p)
