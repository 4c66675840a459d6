"""Lagrange finite element spaces and the averaged-Taylor quasi-interpolant."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import DerivativeUnavailable, UnsupportedPair
from .mesh import BOUNDARY_TOL, Mesh
from .quadrature import Difference, as_field, build_rule, lp_power_by_element, multi_indices
from .taylor import (
    BumpRule,
    RescaledBump,
    averaged_coefficients,
    calibrate_radius,
    anisotropic_radius,
    node_star_h,
    resolve_route,
    star_sectors,
)
from .weights import Ball, Weight, weighted_measure

CHUNK = 1500


class FESpace:
    """Continuous Lagrange space: P1/P2 on simplices, Q1 on tensor meshes."""

    def __init__(self, mesh: Mesh, degree: int = 1):
        if mesh.kind == "tensor" and mesh.dim == 2 and degree != 1:
            raise ValueError("tensor meshes carry the Q1 space only")
        if degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")
        self.mesh = mesh
        self.degree = degree
        self.family = "Q" if (mesh.kind == "tensor" and mesh.dim == 2) else "P"
        self._build_dofs()

    def _build_dofs(self) -> None:
        mesh = self.mesh
        el = mesh.elements
        if self.degree == 1:
            self.coords = mesh.nodes
            self.cell_dofs = el
        elif mesh.dim == 1:
            mids = 0.5 * (mesh.nodes[el[:, 0]] + mesh.nodes[el[:, 1]])
            self.coords = np.concatenate([mesh.nodes, mids])
            extra = mesh.num_nodes + np.arange(mesh.num_elements)
            self.cell_dofs = np.column_stack([el, extra])
        else:
            pairs = np.sort(np.concatenate([el[:, [0, 1]], el[:, [1, 2]], el[:, [2, 0]]]), axis=1)
            uniq, inv = np.unique(pairs, axis=0, return_inverse=True)
            inv = inv.ravel().reshape(3, -1).T
            mids = 0.5 * (mesh.nodes[uniq[:, 0]] + mesh.nodes[uniq[:, 1]])
            self.coords = np.concatenate([mesh.nodes, mids])
            self.cell_dofs = np.column_stack([el, mesh.num_nodes + inv])
        lo, hi = np.asarray(mesh.lower), np.asarray(mesh.upper)
        scale = np.maximum(np.abs(hi - lo), 1.0)
        on = (np.abs(self.coords - lo) <= BOUNDARY_TOL * scale) | (np.abs(self.coords - hi) <= BOUNDARY_TOL * scale)
        self.boundary = on.any(axis=1)

    @property
    def num_dofs(self) -> int:
        return len(self.coords)

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @cached_property
    def incidence(self) -> sparse.csc_matrix:
        E, k = self.cell_dofs.shape
        rows = np.repeat(np.arange(E), k)
        return sparse.csc_matrix((np.ones(E * k), (rows, self.cell_dofs.ravel())), shape=(E, self.num_dofs))

    def star(self, dof: int) -> np.ndarray:
        inc = self.incidence
        return np.sort(inc.indices[inc.indptr[dof]:inc.indptr[dof + 1]])

    # -- local basis --------------------------------------------------------
    @cached_property
    def _affine(self):
        v = self.mesh.element_vertices
        if self.mesh.dim == 1:
            L = v[:, 1, 0] - v[:, 0, 0]
            G = np.stack([-1.0 / L, 1.0 / L], axis=1)[:, :, None]
            return v[:, 0], G
        B = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
        Binv = np.linalg.inv(B)
        G = np.concatenate([-Binv.sum(axis=1, keepdims=True), Binv], axis=1)
        return v[:, 0], G

    def basis_derivatives(self, kappa, x: np.ndarray, elem: np.ndarray) -> np.ndarray:
        """``D^kappa`` of every local shape function, shape (P, nloc)."""
        kappa = tuple(kappa)
        axes = [i for i, k in enumerate(kappa) for _ in range(k)]
        if self.family == "Q":
            return self._q1(axes, x, elem)
        a0, G = self._affine
        Ge = G[elem]  # (P, d+1, d)
        rel = x - a0[elem]
        lam_rest = np.einsum("pid,pd->pi", Ge[:, 1:, :], rel)
        lam = np.concatenate([1.0 - lam_rest.sum(axis=1, keepdims=True), lam_rest], axis=1)
        if len(axes) > 2:
            return np.zeros((len(x), self.cell_dofs.shape[1]))
        if self.degree == 1:
            if not axes:
                return lam
            if len(axes) == 1:
                return Ge[:, :, axes[0]]
            return np.zeros_like(lam)
        edges = [(0, 1)] if self.mesh.dim == 1 else [(0, 1), (1, 2), (2, 0)]
        cols = []
        for i in range(lam.shape[1]):
            li = lam[:, i]
            if not axes:
                cols.append(li * (2 * li - 1))
            elif len(axes) == 1:
                cols.append((4 * li - 1) * Ge[:, i, axes[0]])
            else:
                cols.append(4 * Ge[:, i, axes[0]] * Ge[:, i, axes[1]])
        for i, j in edges:
            li, lj = lam[:, i], lam[:, j]
            if not axes:
                cols.append(4 * li * lj)
            elif len(axes) == 1:
                k = axes[0]
                cols.append(4 * (Ge[:, i, k] * lj + li * Ge[:, j, k]))
            else:
                k, l = axes
                cols.append(4 * (Ge[:, i, k] * Ge[:, j, l] + Ge[:, i, l] * Ge[:, j, k]))
        return np.column_stack(cols)

    def _q1(self, axes, x, elem):
        v = self.mesh.element_vertices[elem]
        lo = v[:, 0]
        size = v[:, 2] - v[:, 0]
        s = (x - lo) / size
        # per-axis factors: value and derivative of the two 1D hats
        f = []
        for d in range(2):
            n = axes.count(d)
            if n == 0:
                f.append((1 - s[:, d], s[:, d]))
            elif n == 1:
                f.append((-1.0 / size[:, d], 1.0 / size[:, d]))
            else:
                z = np.zeros(len(x))
                f.append((z, z))
        fx, fy = f
        ones = np.ones(len(x))
        cols = [fx[0] * fy[0], fx[1] * fy[0], fx[1] * fy[1], fx[0] * fy[1]]
        return np.column_stack([c * ones for c in cols])

    def locate(self, x) -> np.ndarray:
        return self.mesh.locate(x)


class FEFunction:
    """``sum_z c_z phi_z``; evaluation accepts an optional element index per point."""

    piecewise_polynomial = True
    max_order = 1

    def __init__(self, space: FESpace, coeffs=None):
        self.space = space
        c = np.zeros(space.num_dofs) if coeffs is None else np.asarray(coeffs, dtype=float)
        if c.shape != (space.num_dofs,):
            raise ValueError("coefficient vector has the wrong length")
        self.coeffs = c

    @property
    def dim(self) -> int:
        return self.space.mesh.dim

    def derivative_at(self, kappa, x, elem=None) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        elem = self.space.locate(x) if elem is None else np.asarray(elem)
        B = self.space.basis_derivatives(kappa, x, elem)
        return np.einsum("pk,pk->p", B, self.coeffs[self.space.cell_dofs[elem]])

    def __call__(self, x, elem=None) -> np.ndarray:
        return self.derivative_at((0,) * self.dim, x, elem)

    def gradient(self, x, elem=None) -> np.ndarray:
        return np.column_stack([self.derivative_at(a, x, elem) for a in multi_indices(self.dim, 1)])

    def __add__(self, other: "FEFunction") -> "FEFunction":
        return FEFunction(self.space, self.coeffs + other.coeffs)

    def __mul__(self, c: float) -> "FEFunction":
        return FEFunction(self.space, c * self.coeffs)

    __rmul__ = __mul__

    def dump(self, fh) -> None:
        """Node-value CSV: dof index, coordinates, coefficient."""
        names = ["x", "y"][: self.dim]
        fh.write(",".join(["dof", *names, "value"]) + "\n")
        for i, (c, v) in enumerate(zip(self.space.coords, self.coeffs)):
            fh.write(",".join([str(i), *(repr(float(t)) for t in c), repr(float(v))]) + "\n")


def evaluate(F: FEFunction, x) -> np.ndarray:
    return F(x)


def gradient_at(F: FEFunction, x) -> np.ndarray:
    return F.gradient(x)


def nodal_interpolant(v, space: FESpace) -> FEFunction:
    """Lagrange interpolant (all nodes, including the boundary)."""
    v = as_field(v, space.mesh.dim)
    return FEFunction(space, v.derivative_at((0,) * space.mesh.dim, space.coords))


# ---------------------------------------------------------------------------
# quasi-interpolation
# ---------------------------------------------------------------------------


def space_bumps(space: FESpace, radius: float | None = None) -> list[RescaledBump]:
    """One bump per interior degree of freedom."""
    mesh = space.mesh
    m = space.degree
    interior = space.interior
    stars = [space.star(z) for z in interior]
    aniso = space.family == "Q"
    if aniso:
        r = anisotropic_radius(mesh) if radius is None else radius
    else:
        r = calibrate_radius(mesh, m, space.coords[interior], stars) if radius is None else radius
    out = []
    for z, els in zip(interior, stars):
        sectors = star_sectors(mesh, space.coords[z], els)
        h = node_star_h(mesh, els)
        scales = r * h if aniso else np.full(mesh.dim, r * h[0] / (m + 1))
        b = RescaledBump(space.coords[z], scales, sectors, h, m, aniso)
        b.verify_support()
        out.append(b)
    return out


def quasi_interpolate(v, space: FESpace, route: str = "auto", radius: float | None = None) -> FEFunction:
    """Interior coefficient ``Q^m_z v(z)``; boundary coefficients are zero."""
    mesh = space.mesh
    v = as_field(v, mesh.dim)
    m = space.degree
    route = resolve_route(v, m, route, mesh.dim)
    bumps = space_bumps(space, radius)
    vals = np.zeros(len(bumps))
    for s in range(0, len(bumps), CHUNK):
        rule = BumpRule.build(bumps[s:s + CHUNK], fine=(route == "parts"))
        # the constant coefficient of the polynomial centered at z is its value at z
        vals[s:s + CHUNK] = averaged_coefficients(v, rule, m, route)[:, 0]
    c = np.zeros(space.num_dofs)
    c[space.interior] = vals
    return FEFunction(space, c)


# ---------------------------------------------------------------------------
# error tables
# ---------------------------------------------------------------------------


def _require(v, order: int) -> None:
    if getattr(v, "max_order", 0) < order and not getattr(v, "piecewise_polynomial", False):
        raise DerivativeUnavailable(f"error tables need derivatives of v up to order {order}")


def _patch_sum(mesh: Mesh, per_element: np.ndarray) -> np.ndarray:
    return mesh.element_neighbors @ per_element


def _element_h(mesh: Mesh) -> np.ndarray:
    return mesh.diameters


@dataclass
class ErrorTable:
    h: np.ndarray
    h_axes: np.ndarray
    error: np.ndarray
    patch_seminorm: np.ndarray
    ratio: np.ndarray
    interior: np.ndarray

    def rows(self) -> list[tuple]:
        out = []
        for i in range(len(self.error)):
            hs = tuple(float(v) for v in self.h_axes[i]) if self.h_axes.shape[1] > 1 else (float(self.h[i]),)
            out.append((i, *hs, float(self.error[i]), float(self.patch_seminorm[i]), float(self.ratio[i])))
        return out

    def to_csv(self, fh) -> None:
        hcols = ["h1", "h2"] if self.h_axes.shape[1] > 1 else ["h"]
        fh.write(",".join(["element", *hcols, "error", "patch_seminorm", "ratio"]) + "\n")
        for r in self.rows():
            fh.write(",".join([str(r[0])] + [repr(x) for x in r[1:]]) + "\n")


def _interior_patches(space: FESpace) -> np.ndarray:
    mesh = space.mesh
    touches = space.boundary[space.cell_dofs].any(axis=1).astype(float)
    return (_patch_sum(mesh, touches) == 0)


def local_error_table(v, F: FEFunction, w: Weight, p: float, k: int, degree: int | None = None) -> ErrorTable:
    """Per-element ``|v - F|_{W^k_p(w,T)}`` with the patch data of the local estimate."""
    space = F.space
    mesh = space.mesh
    m = space.degree
    v = as_field(v, mesh.dim)
    _require(v, max(k, m + 1))
    rule = build_rule(mesh, w, degree or 2 * m + 4)
    err = lp_power_by_element(Difference(v, F), w, p, mesh, k, rule) ** (1.0 / p)
    semi = _patch_sum(mesh, lp_power_by_element(v, w, p, mesh, m + 1, rule)) ** (1.0 / p)
    h = _element_h(mesh)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = err / (h ** (m + 1 - k) * semi)
    return ErrorTable(h, mesh.sizes, err, semi, ratio, _interior_patches(space))


def stability_table(v, F: FEFunction, w: Weight, p: float, k: int, degree: int | None = None) -> np.ndarray:
    """Per-element ``|F|_{W^k_p(w,T)} / sum_l h_T^(l-k) |v|_{W^l_p(w,S_T)}``."""
    space = F.space
    mesh = space.mesh
    v = as_field(v, mesh.dim)
    _require(v, k)
    rule = build_rule(mesh, w, degree or 2 * space.degree + 4)
    top = lp_power_by_element(F, w, p, mesh, k, rule) ** (1.0 / p)
    h = _element_h(mesh)
    bottom = sum(
        h ** (l - k) * _patch_sum(mesh, lp_power_by_element(v, w, p, mesh, l, rule)) ** (1.0 / p)
        for l in range(k + 1)
    )
    return top / bottom


def global_error(v, F: FEFunction, w: Weight, p: float, k: int, degree: int | None = None,
                 elements=None) -> tuple[float, float]:
    """``((sum_T h_T^(-(m+1-k)p) |v-F|^p_T)^(1/p), (sum_T |v-F|^p_T)^(1/p))``."""
    space = F.space
    mesh = space.mesh
    m = space.degree
    v = as_field(v, mesh.dim)
    _require(v, k)
    rule = build_rule(mesh, w, degree or 2 * m + 4)
    e = lp_power_by_element(Difference(v, F), w, p, mesh, k, rule)
    if elements is not None:
        mask = np.zeros(mesh.num_elements, dtype=bool)
        mask[np.asarray(elements)] = True
        e = np.where(mask, e, 0.0)
    h = _element_h(mesh)
    scaled = float(np.sum(h ** (-(m + 1 - k) * p) * e)) ** (1.0 / p)
    return scaled, float(np.sum(e)) ** (1.0 / p)


# ---------------------------------------------------------------------------
# different metrics
# ---------------------------------------------------------------------------


def _same_power(a: Weight, b: Weight) -> bool:
    return a.kind == b.kind == "power" and a.center == b.center and a.exponent == b.exponent


def check_pair(rho: Weight, omega: Weight) -> str:
    """Name of the supported ``(rho, omega)`` pair, or raise ``UnsupportedPair``."""
    if rho.kind == "constant" and omega.kind == "constant":
        return "unweighted"
    if _same_power(rho, omega):
        return "power"
    if rho.kind == "dirac_log" and rho.exponent == -1.0 and omega.kind == "constant":
        return "dirac"
    if rho.kind == "constant" and omega.kind == "extension":
        return "extension"
    raise UnsupportedPair(f"weight pair ({rho.kind}, {omega.kind}) is not supported")


@dataclass
class MetricsTable:
    error: np.ndarray
    factor: np.ndarray
    q: float

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.error / self.factor

    @property
    def total_error(self) -> float:
        return float(np.sum(self.error**self.q)) ** (1.0 / self.q)

    @property
    def max_ratio(self) -> float:
        r = self.ratio
        return float(np.max(r[np.isfinite(r)]))


def different_metrics_error(v, F: FEFunction, rho: Weight, q: float, omega: Weight, p: float,
                            k: int, degree: int | None = None) -> MetricsTable:
    """Per-element ``|v-F|_{W^k_q(rho,T)}`` against ``h_T rho(S_T)^(1/q) omega(S_T)^(-1/p) |v|_{W^(k+1)_p(omega,S_T)}``."""
    if k not in (0, 1):
        raise ValueError("k must be 0 or 1")
    if p > q:
        raise ValueError("need p <= q")
    check_pair(rho, omega)
    space = F.space
    mesh = space.mesh
    v = as_field(v, mesh.dim)
    _require(v, k + 1)
    deg = degree or 2 * space.degree + 4
    rr = build_rule(mesh, rho, deg)
    ro = build_rule(mesh, omega, deg)
    err = lp_power_by_element(Difference(v, F), rho, q, mesh, k, rr) ** (1.0 / q)
    rho_patch = _patch_sum(mesh, rr.element_sums(np.ones(rr.num_points)))
    om_patch = _patch_sum(mesh, ro.element_sums(np.ones(ro.num_points)))
    semi = _patch_sum(mesh, lp_power_by_element(v, omega, p, mesh, k + 1, ro)) ** (1.0 / p)
    factor = _element_h(mesh) * rho_patch ** (1.0 / q) * om_patch ** (-1.0 / p) * semi
    return MetricsTable(err, factor, q)


def compatibility_probe(rho: Weight, q: float, omega: Weight, p: float, x, radii) -> float:
    """Largest ``(r/R)(rho(B_r)/rho(B_R))^(1/q)(omega(B_r)/omega(B_R))^(-1/p)`` over ``r <= R``."""
    x = tuple(np.atleast_1d(np.asarray(x, dtype=float)))
    radii = sorted(float(r) for r in radii)
    mr = [weighted_measure(rho, Ball(x, r)) for r in radii]
    mo = [weighted_measure(omega, Ball(x, r)) for r in radii]
    best = -math.inf
    for i, r in enumerate(radii):
        for j in range(i, len(radii)):
            R = radii[j]
            val = (r / R) * (mr[i] / mr[j]) ** (1.0 / q) * (mo[i] / mo[j]) ** (-1.0 / p)
            best = max(best, val)
    return best
