"""Smooth bumps, Taylor polynomials and averaged Taylor polynomials.

The averaged Taylor polynomial of ``v`` about a node ``z`` is the Taylor
polynomial of ``v`` averaged in its base point against a bump ``psi_z``
supported inside the star of ``z``. All integrals over the bump support are
done with a polar rule in scaled coordinates. The rule is split into
angular sectors along the element edges through ``z``, so finite element
data is integrated piecewise. The bump is normalized with the same discrete
rule, which makes ``int psi_z = 1`` hold to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.special import comb

from .errors import DerivativeUnavailable, QuadratureFailure
from .mesh import Mesh
from .quadrature import (
    Difference,
    as_field,
    build_rule,
    field_values,
    gauss_legendre01,
    multi_indices,
    weighted_seminorm,
)
from .weights import Weight

RADIAL_PANELS = (0.0, 0.4, 0.7, 0.85, 0.95, 1.0)
RADIAL_POINTS = 8
# bump derivatives steepen near the rim; the parts route needs a finer rule
FINE_RADIAL_PANELS = (0.0, 0.5, 0.75, 0.875, 0.94, 0.97, 0.985, 1.0)
FINE_RADIAL_POINTS = 12
ANGULAR_POINTS = 10
SUPPORT_MARGIN = 0.1


# ---------------------------------------------------------------------------
# the mollifier profile
# ---------------------------------------------------------------------------


def mollifier(xi: np.ndarray) -> np.ndarray:
    """``exp(-1/(1-|xi|^2))`` inside the unit ball, 0 outside."""
    q = 1.0 - np.sum(np.atleast_2d(xi) ** 2, axis=1)
    out = np.zeros_like(q)
    inside = q > 0
    out[inside] = np.exp(-1.0 / q[inside])
    return out


def mollifier_derivatives(xi: np.ndarray):
    """Profile, gradient (P,d) and Hessian (P,d,d) in the scaled variable."""
    xi = np.atleast_2d(xi)
    q = 1.0 - np.sum(xi**2, axis=1)
    phi = mollifier(xi)
    qs = np.where(q > 0, q, 1.0)
    grad = phi[:, None] * (-2.0 * xi / qs[:, None] ** 2)
    outer = xi[:, :, None] * xi[:, None, :]
    eye = np.eye(xi.shape[1])[None]
    hess = phi[:, None, None] * (
        4.0 * outer / qs[:, None, None] ** 4
        - 8.0 * outer / qs[:, None, None] ** 3
        - 2.0 * eye / qs[:, None, None] ** 2
    )
    return phi, grad, hess


@lru_cache(maxsize=None)
def mollifier_mass(dim: int) -> float:
    """``int mollifier`` over the unit ball, computed once with adaptive quadrature."""
    f = lambda t: math.exp(-1.0 / (1.0 - t * t)) if t < 1 else 0.0  # noqa: E731
    if dim == 1:
        return 2.0 * integrate.quad(f, 0.0, 1.0, epsabs=1e-16, epsrel=1e-13, limit=200)[0]
    if dim == 2:
        return 2.0 * math.pi * integrate.quad(lambda t: f(t) * t, 0.0, 1.0, epsabs=1e-16, epsrel=1e-13, limit=200)[0]
    raise ValueError("dimension must be 1 or 2")


@dataclass(frozen=True)
class Bump:
    """The normalized mollifier with support radius ``radius``."""

    dim: int
    radius: float = 1.0

    @property
    def normalization(self) -> float:
        return 1.0 / (mollifier_mass(self.dim) * self.radius**self.dim)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        return self.normalization * mollifier(x / self.radius)


# ---------------------------------------------------------------------------
# polynomials in a monomial basis centered at a point
# ---------------------------------------------------------------------------


def monomials(dim: int, degree: int) -> list[tuple[int, ...]]:
    return [a for k in range(degree + 1) for a in multi_indices(dim, k)]


def _mono(x: np.ndarray, a: Sequence[int]) -> np.ndarray:
    out = np.ones(len(x))
    for i, k in enumerate(a):
        if k:
            out = out * x[:, i] ** k
    return out


def _afact(a) -> float:
    return float(np.prod([math.factorial(k) for k in a]))


def _acomb(a, b) -> float:
    return float(np.prod([comb(i, j, exact=True) for i, j in zip(a, b)]))


def _leq(b, a) -> bool:
    return all(j <= i for i, j in zip(a, b))


def _sub(a, b):
    return tuple(i - j for i, j in zip(a, b))


@dataclass(frozen=True)
class Poly:
    """``sum_beta c_beta (y - center)^beta``."""

    center: tuple[float, ...]
    coeffs: tuple[tuple[tuple[int, ...], float], ...]

    piecewise_polynomial = False

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def max_order(self) -> int:
        return 10**6

    @property
    def degree(self) -> int:
        nz = [sum(a) for a, c in self.coeffs if c != 0]
        return max(nz, default=0)

    def coefficient(self, beta) -> float:
        return dict(self.coeffs).get(tuple(beta), 0.0)

    def as_dict(self) -> dict:
        return dict(self.coeffs)

    def __call__(self, y) -> np.ndarray:
        return self.derivative_at((0,) * self.dim, y)

    def derivative(self, alpha) -> "Poly":
        alpha = tuple(alpha)
        out = []
        for b, c in self.coeffs:
            if _leq(alpha, b):
                f = np.prod([math.factorial(i) / math.factorial(i - j) for i, j in zip(b, alpha)])
                out.append((_sub(b, alpha), c * float(f)))
        return Poly(self.center, tuple(out))

    def derivative_at(self, kappa, y, elem=None) -> np.ndarray:
        y = np.asarray(y, dtype=float).reshape(-1, self.dim) - np.asarray(self.center)
        d = self.derivative(kappa)
        out = np.zeros(len(y))
        for b, c in d.coeffs:
            out += c * _mono(y, b)
        return out

    def recentered(self, center) -> "Poly":
        """Same polynomial expanded about another point."""
        center = tuple(float(c) for c in center)
        deg = max((sum(b) for b, _ in self.coeffs), default=0)
        out = []
        for g in monomials(self.dim, deg):
            val = float(self.derivative(g)(np.asarray(center)[None])[0]) / _afact(g)
            out.append((g, val))
        return Poly(center, tuple(out))


class AveragedTaylorPoly(Poly):
    pass


def taylor_poly(v, x, m: int) -> Poly:
    """Taylor polynomial of order ``m`` of ``v`` about ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    v = as_field(v, len(x))
    if m > getattr(v, "max_order", 0):
        raise DerivativeUnavailable(f"Taylor polynomial of order {m} needs derivatives up to {m}")
    coeffs = tuple(
        (a, float(field_values(v, a, x[None])[0]) / _afact(a)) for a in monomials(len(x), m)
    )
    return Poly(tuple(x), coeffs)


# ---------------------------------------------------------------------------
# star geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sector:
    """Part of element ``elem`` seen from the node, in polar form."""

    elem: int
    start: float
    width: float
    reach: float


def _seg_dist(p, a, b) -> float:
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def star_sectors(mesh: Mesh, point, elements) -> tuple[Sector, ...]:
    """Sectors of the listed elements around a point lying on their boundary.

    The point is a vertex of each element or the midpoint of one of its
    edges (1D: any point of the interval). ``reach`` is the distance from the
    point to the part of the element boundary not containing it.
    """
    z = np.asarray(point, dtype=float).reshape(-1)
    out: list[Sector] = []
    for e in np.atleast_1d(elements):
        v = mesh.element_vertices[int(e)]
        scale = float(np.max(v.max(axis=0) - v.min(axis=0)))
        tol = 1e-10 * scale
        if mesh.dim == 1:
            a, b = float(v[:, 0].min()), float(v[:, 0].max())
            if b - z[0] > tol:
                out.append(Sector(int(e), 0.0, 0.0, b - z[0]))
            if z[0] - a > tol:
                out.append(Sector(int(e), math.pi, 0.0, z[0] - a))
            continue
        k = len(v)
        hit = [i for i in range(k) if np.linalg.norm(v[i] - z) <= tol]
        if hit:
            i = hit[0]
            a, b = v[(i + 1) % k] - z, v[(i - 1) % k] - z
            start = math.atan2(a[1], a[0])
            width = math.atan2(a[0] * b[1] - a[1] * b[0], float(np.dot(a, b)))
            reach = min(
                _seg_dist(z, v[j], v[(j + 1) % k]) for j in range(k) if j != i and (j + 1) % k != i
            )
        else:
            edge = None
            for i in range(k):
                a, b = v[i], v[(i + 1) % k]
                if abs(_seg_dist(z, a, b)) <= tol:
                    edge = i
                    break
            if edge is None:
                raise QuadratureFailure("point is not on the element boundary")
            d = v[(edge + 1) % k] - z
            start = math.atan2(d[1], d[0])
            width = math.pi
            reach = min(_seg_dist(z, v[j], v[(j + 1) % k]) for j in range(k) if j != edge)
        if width <= 0:
            raise QuadratureFailure("element is not counter-clockwise")
        out.append(Sector(int(e), start, width, reach))
    return tuple(out)


# ---------------------------------------------------------------------------
# rescaled bumps and their quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RescaledBump:
    """Bump about ``center`` with support semi-axes ``scales``.

    Isotropic bumps use equal scales ``r h_z / (m+1)``; anisotropic ones use
    ``r h^i`` per axis.
    """

    center: np.ndarray
    scales: np.ndarray
    sectors: tuple[Sector, ...]
    h: np.ndarray
    degree: int
    anisotropic: bool = False

    @property
    def dim(self) -> int:
        return len(self.center)

    @cached_property
    def rule(self) -> "BumpRule":
        return BumpRule.build([self])

    @cached_property
    def fine_rule(self) -> "BumpRule":
        return BumpRule.build([self], fine=True)

    def rule_for(self, route: str) -> "BumpRule":
        return self.fine_rule if route == "parts" else self.rule

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        xi = (x - self.center) / self.scales
        return mollifier(xi) / (self.rule.mass[0] * np.prod(self.scales))

    def verify_support(self) -> None:
        """Raise if the support is not inside the star with the required margin."""
        limit = 1.0 - SUPPORT_MARGIN + 1e-12
        for s in self.sectors:
            if self.anisotropic:
                continue
            if self.scales[0] > limit * s.reach:
                raise QuadratureFailure(
                    f"bump support {self.scales[0]:.3g} leaves the star (reach {s.reach:.3g})"
                )


@lru_cache(maxsize=None)
def _radial_rule(dim: int, fine: bool = False) -> tuple[np.ndarray, np.ndarray]:
    panels = FINE_RADIAL_PANELS if fine else RADIAL_PANELS
    gx, gw = gauss_legendre01(FINE_RADIAL_POINTS if fine else RADIAL_POINTS)
    t, w = [], []
    for a, b in zip(panels[:-1], panels[1:]):
        t.append(a + (b - a) * gx)
        w.append((b - a) * gw)
    t = np.concatenate(t)
    w = np.concatenate(w)
    if dim == 2:
        w = w * t
    return t, w


@dataclass(frozen=True, eq=False)
class BumpRule:
    """Quadrature over the supports of a batch of bumps.

    ``node`` tells which bump a point belongs to and ``elem`` which mesh
    element contains it. ``wq`` includes the Jacobian, ``psi`` the
    normalized bump value.
    """

    node: np.ndarray
    elem: np.ndarray
    x: np.ndarray
    xi: np.ndarray
    wq: np.ndarray
    psi: np.ndarray
    centers: np.ndarray
    scales: np.ndarray
    mass: np.ndarray

    @classmethod
    def build(cls, bumps: Sequence[RescaledBump], fine: bool = False) -> "BumpRule":
        dim = bumps[0].dim
        t, tw = _radial_rule(dim, fine)
        node, elem, xi, w = [], [], [], []
        if dim == 1:
            for i, b in enumerate(bumps):
                for s in b.sectors:
                    sign = 1.0 if s.start == 0.0 else -1.0
                    xi.append(sign * t[:, None])
                    w.append(tw)
                    node.append(np.full(len(t), i))
                    elem.append(np.full(len(t), s.elem))
        else:
            ga, gw = gauss_legendre01(ANGULAR_POINTS)
            T, A = np.meshgrid(t, ga, indexing="ij")
            TW = np.outer(tw, gw)
            for i, b in enumerate(bumps):
                for s in b.sectors:
                    # axis scaling maps rays through the center to rays, so
                    # tensor quadrants keep their angles in scaled coordinates
                    theta = s.start + s.width * A
                    xi.append(np.column_stack([(T * np.cos(theta)).ravel(), (T * np.sin(theta)).ravel()]))
                    w.append((TW * s.width).ravel())
                    node.append(np.full(T.size, i))
                    elem.append(np.full(T.size, s.elem))
        node = np.concatenate(node)
        elem = np.concatenate(elem)
        xi = np.concatenate(xi)
        w = np.concatenate(w)
        centers = np.array([b.center for b in bumps])
        scales = np.array([b.scales for b in bumps])
        jac = np.prod(scales, axis=1)
        x = centers[node] + xi * scales[node]
        wq = w * jac[node]
        phi = mollifier(xi)
        mass = np.bincount(node, weights=w * phi, minlength=len(bumps))
        psi = phi / (mass[node] * jac[node])
        return cls(node, elem, x, xi, wq, psi, centers, scales, mass)

    def psi_derivative(self, delta) -> np.ndarray:
        """``D^delta psi`` at the rule points for ``|delta| <= 2``."""
        delta = tuple(delta)
        order = sum(delta)
        if order == 0:
            return self.psi
        if order > 2:
            raise DerivativeUnavailable("bump derivatives are provided up to order 2")
        phi, grad, hess = mollifier_derivatives(self.xi)
        S = self.scales[self.node]
        norm = 1.0 / (self.mass[self.node] * np.prod(S, axis=1))
        idx = [i for i, k in enumerate(delta) for _ in range(k)]
        if order == 1:
            i = idx[0]
            return norm * grad[:, i] / S[:, i]
        i, j = idx
        return norm * hess[:, i, j] / (S[:, i] * S[:, j])

    def sums(self, values) -> np.ndarray:
        return np.bincount(self.node, weights=np.asarray(values) * self.wq, minlength=len(self.centers))


def node_star_h(mesh: Mesh, elements) -> np.ndarray:
    els = np.atleast_1d(elements)
    if mesh.kind == "tensor":
        return mesh.sizes[els].min(axis=0)
    return np.array([mesh.diameters[els].min()])


def calibrate_radius(mesh: Mesh, m: int, points=None, element_lists=None) -> float:
    """Bump radius ``r`` such that every isotropic ``psi_z`` keeps a 10% margin.

    ``psi_z`` has support radius ``r h_z/(m+1)``; the radius is the largest
    value satisfying that bound at every listed node (default: interior
    mesh vertices).
    """
    if points is None:
        interior = np.flatnonzero(~mesh.boundary)
        points = mesh.nodes[interior]
        element_lists = [mesh.node_elements[z] for z in interior]
    best = math.inf
    for z, els in zip(points, element_lists):
        reach = min(s.reach for s in star_sectors(mesh, z, els))
        hz = float(node_star_h(mesh, els)[0])
        best = min(best, (1.0 - SUPPORT_MARGIN) * (m + 1) * reach / hz)
    if not math.isfinite(best):
        raise QuadratureFailure("mesh has no interior node to calibrate the bump on")
    return best


@lru_cache(maxsize=64)
def _mesh_radius(mesh: Mesh, m: int) -> float:
    return calibrate_radius(mesh, m)


def anisotropic_radius(mesh: Mesh) -> float:
    """``r <= 1/sigma`` with sigma the weak shape-regularity ratio, capped by the margin."""
    from .mesh import shape_diagnostics

    _, weak = shape_diagnostics(mesh)
    return min(1.0 - SUPPORT_MARGIN, 1.0 / weak)


def rescaled_bump(mesh: Mesh, point, elements, m: int, radius: float | None = None,
                  anisotropic: bool | None = None) -> RescaledBump:
    """Bump attached to a node given by its coordinates and star elements."""
    point = np.asarray(point, dtype=float).reshape(-1)
    sectors = star_sectors(mesh, point, elements)
    if anisotropic is None:
        anisotropic = mesh.kind == "tensor" and mesh.dim == 2
    h = node_star_h(mesh, elements)
    if anisotropic:
        r = anisotropic_radius(mesh) if radius is None else radius
        scales = r * h
    else:
        r = _mesh_radius(mesh, m) if radius is None else radius
        scales = np.full(mesh.dim, r * h[0] / (m + 1))
    b = RescaledBump(point, scales, sectors, h, m, anisotropic)
    b.verify_support()
    return b


def node_bump(mesh: Mesh, z: int, m: int, radius: float | None = None,
              anisotropic: bool | None = None) -> RescaledBump:
    if mesh.boundary[z]:
        raise ValueError("bumps are not built for boundary nodes")
    return rescaled_bump(mesh, mesh.nodes[z], mesh.node_elements[z], m, radius, anisotropic)


# ---------------------------------------------------------------------------
# averaged Taylor polynomials
# ---------------------------------------------------------------------------


def _dmono(x: np.ndarray, gamma, mu) -> np.ndarray:
    """``D^mu_x (c - x)^gamma`` given ``x`` already shifted to ``c - x``."""
    out = np.ones(len(x))
    for i, (g, k) in enumerate(zip(gamma, mu)):
        if k > g:
            return np.zeros(len(x))
        out = out * (-1.0) ** k * (math.factorial(g) / math.factorial(g - k)) * x[:, i] ** (g - k)
    return out


def resolve_route(v, m: int, route: str, dim: int) -> str:
    if route != "auto":
        return route
    return "derivative" if getattr(as_field(v, dim), "max_order", 0) >= m else "parts"


def averaged_coefficients(v, rule: BumpRule, m: int, route: str = "auto") -> np.ndarray:
    """Coefficients (N, K) of the averaged Taylor polynomials about each bump center.

    Columns follow ``monomials(dim, m)``. ``route`` is ``"derivative"``
    (needs derivatives of ``v`` up to ``m``), ``"parts"`` (moves all
    derivatives onto the bump) or ``"auto"``.
    """
    dim = rule.x.shape[1]
    v = as_field(v, dim)
    route = resolve_route(v, m, route, dim)
    basis = monomials(dim, m)
    zx = rule.centers[rule.node] - rule.x  # z - x
    out = np.zeros((len(rule.centers), len(basis)))
    if route == "derivative":
        dv = {a: field_values(v, a, rule.x, rule.elem) for a in basis}
        for j, beta in enumerate(basis):
            acc = np.zeros(len(rule.wq))
            for a in basis:
                if _leq(beta, a):
                    acc += _acomb(a, beta) / _afact(a) * dv[a] * _mono(zx, _sub(a, beta))
            out[:, j] = rule.sums(acc * rule.psi)
        return out
    if route != "parts":
        raise ValueError(f"unknown route {route!r}")
    vals = field_values(v, (0,) * dim, rule.x, rule.elem)
    dpsi = {d: rule.psi_derivative(d) for d in basis if sum(d) <= 2}
    if m > 2:
        raise DerivativeUnavailable("the integration-by-parts route supports m <= 2")
    for j, beta in enumerate(basis):
        acc = np.zeros(len(rule.wq))
        for a in basis:
            if not _leq(beta, a):
                continue
            g = _sub(a, beta)
            term = np.zeros(len(rule.wq))
            for delta in basis:
                if _leq(delta, a):
                    term += _acomb(a, delta) * _dmono(zx, g, _sub(a, delta)) * dpsi[delta]
            acc += (-1.0) ** sum(a) * _acomb(a, beta) / _afact(a) * term
        out[:, j] = rule.sums(acc * vals)
    return out


def _poly_from(center, coeffs, m) -> AveragedTaylorPoly:
    basis = monomials(len(center), m)
    return AveragedTaylorPoly(tuple(float(c) for c in center), tuple(zip(basis, map(float, coeffs))))


def averaged_taylor(v, mesh: Mesh, z: int, m: int, bump: RescaledBump | None = None,
                    route: str = "auto") -> AveragedTaylorPoly:
    """Averaged Taylor polynomial of degree ``m`` of ``v`` about mesh node ``z``."""
    bump = bump or node_bump(mesh, z, m)
    route = resolve_route(v, m, route, mesh.dim)
    coeffs = averaged_coefficients(v, bump.rule_for(route), m, route)[0]
    return _poly_from(bump.center, coeffs, m)


class _DerivedField:
    def __init__(self, v, alpha):
        self.v, self.alpha = v, tuple(alpha)
        self.dim = v.dim
        self.max_order = getattr(v, "max_order", 0) - sum(alpha)
        self.piecewise_polynomial = getattr(v, "piecewise_polynomial", False)

    def derivative_at(self, kappa, x, elem=None):
        k = tuple(i + j for i, j in zip(kappa, self.alpha))
        return field_values(self.v, k, x, elem)


def derivative_commutes(v, mesh: Mesh, z: int, m: int, alpha, bump: RescaledBump | None = None,
                        route: str = "derivative") -> tuple[Poly, Poly]:
    """``(D^alpha Q^m v, Q^(m-|alpha|) D^alpha v)`` with one shared bump."""
    alpha = tuple(alpha)
    if sum(alpha) > m:
        raise ValueError("|alpha| must not exceed m")
    v = as_field(v, mesh.dim)
    bump = bump or node_bump(mesh, z, m)
    lhs = averaged_taylor(v, mesh, z, m, bump, route).derivative(alpha)
    rhs = averaged_taylor(_DerivedField(v, alpha), mesh, z, m - sum(alpha), bump, route)
    return lhs, rhs


# ---------------------------------------------------------------------------
# probes
# ---------------------------------------------------------------------------


def star_elements(mesh: Mesh, z: int) -> np.ndarray:
    return mesh.node_elements[z]


def local_error(v, mesh: Mesh, z: int, m: int, k: int, w: Weight, p: float,
                bump: RescaledBump | None = None, degree: int = 12) -> tuple[float, float, float]:
    """``(|v - Q^m_z v|_{W^k_p(w,S_z)}, |v|_{W^(m+1)_p(w,S_z)}, h_z)``."""
    els = star_elements(mesh, z)
    v = as_field(v, mesh.dim)
    q = averaged_taylor(v, mesh, z, m, bump)
    rule = build_rule(mesh, w, degree, elements=els)
    err = weighted_seminorm(Difference(v, q), w, p, k, mesh, rule)
    semi = weighted_seminorm(v, w, p, m + 1, mesh, rule)
    return err, semi, float(node_star_h(mesh, els)[0])


def stability_probe(v, mesh: Mesh, z: int, m: int, k: int, w: Weight, p: float,
                    bump: RescaledBump | None = None, degree: int = 12) -> tuple[float, float]:
    """``(||Q^m_z v||_inf on S_z, h^-n ||1||_{L^p'(w^(-p'/p))} sum_l h^l |v|_{W^l_p(w)})``."""
    els = star_elements(mesh, z)
    v = as_field(v, mesh.dim)
    bump = bump or node_bump(mesh, z, m)
    q = averaged_taylor(v, mesh, z, m, bump)
    dense = build_rule(mesh, Weight.constant(mesh.dim), degree, elements=els).x
    samples = np.concatenate([dense, mesh.nodes[np.unique(mesh.elements[els])]])
    lhs = float(np.max(np.abs(q(samples))))
    pd = p / (p - 1.0)
    dual = build_rule(mesh, w.raised(-pd / p), degree, elements=els)
    one = dual.integrate(np.ones(dual.num_points)) ** (1.0 / pd)
    rule = build_rule(mesh, w, degree, elements=els)
    hz = float(node_star_h(mesh, els)[0])
    total = sum(hz**l * weighted_seminorm(v, w, p, l, mesh, rule) for l in range(k + 1))
    return lhs, hz ** (-mesh.dim) * one * total


@dataclass
class PoincareResult:
    ratios: list[float]
    patch_ratios: list[float] = field(default_factory=list)

    @property
    def max_ratio(self) -> float:
        return max(self.ratios + self.patch_ratios)


def _grad_norm_p(v, rule, dim, p) -> float:
    g2 = sum(field_values(v, a, rule.x, rule.elem) ** 2 for a in multi_indices(dim, 1))
    return rule.integrate(g2 ** (p / 2.0)) ** (1.0 / p)


def poincare_probe(mesh: Mesh, w: Weight, p: float, chi, samples, elements=None,
                   patches: Sequence[tuple[Sequence[int], object]] = (), degree: int = 12) -> PoincareResult:
    """Ratios ``||v - avg_chi v||_{L^p(w,S)} / ||grad v||_{L^p(w,S)}``.

    ``S`` is the union of ``elements`` (default: the whole mesh) and
    ``avg_chi v = int chi v / int chi``. Each entry of ``patches`` is an
    element subset ``S_i`` with its own averaging function ``chi_i``; the
    corresponding ratios use ``v - avg_{chi_i} v`` on all of ``S``.
    """
    plain = build_rule(mesh, Weight.constant(mesh.dim), degree, elements=elements)
    rule = build_rule(mesh, w, degree, elements=elements)
    chi_vals = np.asarray(chi(plain.x))
    chi_mass = plain.integrate(chi_vals)
    patch_data = []
    for els, chi_i in patches:
        pr = build_rule(mesh, Weight.constant(mesh.dim), degree, elements=els)
        cv = np.asarray(chi_i(pr.x))
        patch_data.append((pr, cv, pr.integrate(cv)))
    res = PoincareResult([])
    for v in samples:
        v = as_field(v, mesh.dim)
        grad = _grad_norm_p(v, rule, mesh.dim, p)
        vals = field_values(v, (0,) * mesh.dim, rule.x, rule.elem)
        mean = plain.integrate(chi_vals * v(plain.x)) / chi_mass
        res.ratios.append(rule.integrate(np.abs(vals - mean) ** p) ** (1.0 / p) / grad)
        for pr, cv, cm in patch_data:
            mean_i = pr.integrate(cv * v(pr.x)) / cm
            res.patch_ratios.append(rule.integrate(np.abs(vals - mean_i) ** p) ** (1.0 / p) / grad)
    return res
