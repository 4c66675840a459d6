"""Level-by-level drivers for the convergence and property studies."""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from . import fem, quadrature, taylor
from .config import DESCRIPTIONS, ExperimentConfig, parse_floats
from .errors import DegenerateFit, InvalidGrading, MuckfemError
from .interp import FESpace, global_error, different_metrics_error, quasi_interpolate
from .mesh import build_simplicial, build_tensor, refine_uniform, structured_triangulation
from .quadrature import Difference, SmoothFunction, build_rule, weighted_lp_norm, weighted_seminorm
from .weights import BallFamily, Weight, estimate_ap_constant

FIT_MIN_ROWS = 3


class LevelError(MuckfemError):
    """A module error raised while computing one level of a study."""

    def __init__(self, level: int, exc: Exception):
        super().__init__(f"level {level}: {type(exc).__name__}: {exc}")
        self.level = level
        self.original = exc


@dataclass
class ConvergenceReport:
    kind: str
    name: str
    columns: list[str]
    rows: list[tuple]
    x_column: str
    norms: list[str]
    fits: dict[str, tuple[float, float]] = field(default_factory=dict)
    fit_rows: int = 0
    flags: dict[str, object] = field(default_factory=dict)
    config_hash: str = ""
    tolerances: dict[str, float] = field(default_factory=dict)
    wall_time: float = 0.0

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def order(self, norm: str) -> float:
        return self.fits[norm][0]


def fit_order(xs, errors) -> tuple[float, float]:
    """Least-squares slope of ``log error`` against ``log x`` and its R^2."""
    x = np.asarray(xs, dtype=float)
    e = np.asarray(errors, dtype=float)
    if len(x) < FIT_MIN_ROWS:
        raise DegenerateFit(f"need at least {FIT_MIN_ROWS} rows, got {len(x)}")
    if np.any(x <= 0) or np.all(x == x[0]):
        raise DegenerateFit("abscissae must be positive and not all equal")
    if np.any(~(e > 0)):
        raise DegenerateFit("errors must be positive")
    lx, le = np.log(x), np.log(e)
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, le, rcond=None)
    resid = le - A @ coef
    tot = float(np.sum((le - le.mean()) ** 2))
    r2 = 1.0 if tot == 0 else 1.0 - float(np.sum(resid**2)) / tot
    return float(coef[0]), r2


def _finish(rep: ConvergenceReport, cfg: ExperimentConfig) -> ConvergenceReport:
    n = len(rep.rows)
    keep = n if cfg.get("experiment", "fit_all") else max(FIT_MIN_ROWS, n - 1)
    keep = min(keep, n)
    rep.fit_rows = keep
    x = rep.column(rep.x_column)[n - keep:]
    for norm in rep.norms:
        rep.fits[norm] = fit_order(x, rep.column(norm)[n - keep:])
    rep.config_hash = cfg.digest
    rep.tolerances = {
        "quadrature_tol": cfg.get("tolerances", "quadrature"),
        "solver_tol": cfg.get("tolerances", "solver"),
        "singular_jacobi_order": quadrature.SINGULAR_ORDER,
        "dyadic_levels": quadrature.DYADIC_LEVELS,
        "bump_margin": taylor.SUPPORT_MARGIN,
    }
    return rep


def _levels(cfg: ExperimentConfig, compute):
    rows = []
    for level in range(cfg.levels):
        try:
            rows.append(compute(level))
        except MuckfemError as exc:
            raise LevelError(level, exc) from exc
    return rows


def _domain(cfg: ExperimentConfig):
    dom = cfg.get("mesh", "domain")
    if dom in ("unit-interval", "interval"):
        return (0.0, 1.0), 1
    if dom in ("unit-square", "square"):
        return "unit-square", 2
    vals = parse_floats(dom)
    if len(vals) == 2:
        return vals, 1
    if len(vals) == 4:
        return ((vals[0], vals[1]), (vals[2], vals[3])), 2
    raise MuckfemError(f"cannot interpret domain {dom!r}")


def _simplicial_levels(cfg: ExperimentConfig):
    dom, dim = _domain(cfg)
    h0 = cfg.get("mesh", "h0") or (0.25 if dim == 1 else math.sqrt(2.0) / 4)
    mesh = build_simplicial(dom, h0)
    out = [mesh]
    for _ in range(cfg.levels - 1):
        out.append(refine_uniform(out[-1]))
    return out, dim


def _orders(cfg: ExperimentConfig) -> list[int]:
    return [int(k) for k in parse_floats(cfg.get("norm", "orders"))]


# ---------------------------------------------------------------------------
# interpolation studies
# ---------------------------------------------------------------------------


def run_interp_rate(cfg: ExperimentConfig) -> ConvergenceReport:
    meshes, dim = _simplicial_levels(cfg)
    w = cfg.weight(dim=dim)
    p = cfg.get("norm", "p")
    m = cfg.get("norm", "degree")
    ks = _orders(cfg)
    v = SmoothFunction.from_expression(cfg.get("norm", "function"), dim=dim, max_order=m + 2)

    def compute(level):
        mesh = meshes[level]
        F = quasi_interpolate(v, FESpace(mesh, m))
        errs = [global_error(v, F, w, p, k)[1] for k in ks]
        return (level, mesh.max_h, F.space.num_dofs, *errs)

    norms = [f"error_k{k}" for k in ks]
    rep = ConvergenceReport(cfg.kind, cfg.name, ["level", "h", "ndof", *norms], _levels(cfg, compute), "h", norms)
    return _finish(rep, cfg)


def run_aniso_rate(cfg: ExperimentConfig) -> ConvergenceReport:
    nx, ny = cfg.get("mesh", "nx"), cfg.get("mesh", "ny")
    axis = cfg.get("mesh", "refine")
    lo, hi = parse_floats(cfg.get("mesh", "window"))
    w = cfg.weight(dim=2)
    p = cfg.get("norm", "p")
    ks = _orders(cfg)
    v = SmoothFunction.from_expression(cfg.get("norm", "function"), dim=2, max_order=3)

    def compute(level):
        fx = nx * (2**level if axis == "x" else 1)
        fy = ny * (2**level if axis == "y" else 1)
        ys = np.linspace(0.0, 1.0, fy + 1)
        mesh = build_tensor([np.linspace(0.0, 1.0, fx + 1), ys])
        F = quasi_interpolate(v, FESpace(mesh, 1))
        c = mesh.element_vertices.mean(axis=1)
        inside = np.flatnonzero((c[:, 1] > lo) & (c[:, 1] < hi))
        errs = [global_error(v, F, w, p, k, elements=inside)[1] for k in ks]
        return (level, 1.0 / fx, 1.0 / fy, F.space.num_dofs, *errs)

    norms = [f"error_k{k}" for k in ks]
    rows = _levels(cfg, compute)
    rep = ConvergenceReport(cfg.kind, cfg.name, ["level", "hx", "hy", "ndof", *norms], rows,
                            "hx" if axis == "x" else "hy", norms)
    for n in norms:
        e = rep.column(n)
        rep.flags[f"max_relative_change_{n}"] = float(np.max(np.abs(e - e[0])) / e[0])
    return _finish(rep, cfg)


def run_metrics_check(cfg: ExperimentConfig) -> ConvergenceReport:
    meshes, dim = _simplicial_levels(cfg)
    rho = cfg.weight("weight", dim)
    omega = cfg.weight("second_weight", dim)
    p, q = cfg.get("norm", "p"), cfg.get("norm", "q")
    ks = _orders(cfg)
    v = SmoothFunction.from_expression(cfg.get("norm", "function"), dim=dim, max_order=3)

    def compute(level):
        mesh = meshes[level]
        F = quasi_interpolate(v, FESpace(mesh, 1))
        out = []
        for k in ks:
            t = different_metrics_error(v, F, rho, q, omega, p, k)
            out += [t.total_error, t.max_ratio]
        return (level, mesh.max_h, *out)

    cols = []
    for k in ks:
        cols += [f"error_k{k}", f"max_ratio_k{k}"]
    rep = ConvergenceReport(cfg.kind, cfg.name, ["level", "h", *cols], _levels(cfg, compute), "h",
                            [f"error_k{k}" for k in ks])
    return _finish(rep, cfg)


# ---------------------------------------------------------------------------
# weights and Poincare
# ---------------------------------------------------------------------------


def run_ap_check(cfg: ExperimentConfig) -> ConvergenceReport:
    p = cfg.get("norm", "p")
    dim = cfg.get("weight", "dim") or 1
    rows = []
    for i, g in enumerate(parse_floats(cfg.get("problem", "exponents"))):
        w = Weight.power((0.0,) * dim, g)
        try:
            est = estimate_ap_constant(w, p, BallFamily(), tol=cfg.get("tolerances", "quadrature"))
        except MuckfemError as exc:
            raise LevelError(i, exc) from exc
        expected = not (-dim < g < dim * (p - 1))
        rows.append((g, est.sampled_max, int(est.divergent), int(expected)))
    rep = ConvergenceReport(cfg.kind, cfg.name, ["gamma", "sampled_max", "divergent", "expected_divergent"],
                            rows, "gamma", [])
    rep.flags["all_match"] = all(r[2] == r[3] for r in rows)
    return _finish(rep, cfg)


def _random_cubics(count: int, seed: int):
    rng = np.random.default_rng(seed)
    mons = taylor.monomials(2, 3)
    return [rng.standard_normal(len(mons)) for _ in range(count)], mons


def run_poincare(cfg: ExperimentConfig) -> ConvergenceReport:
    """Poincare ratios on ``[-t,t]^2`` for ``t = 2^-j`` with a homogeneous weight at 0.

    Each cubic is rescaled with the square so that the ratio divided by
    ``t`` is invariant under exact arithmetic.
    """
    w = cfg.weight(dim=2)
    p = cfg.get("norm", "p")
    coeffs, mons = _random_cubics(cfg.get("problem", "samples"), cfg.get("experiment", "seed"))
    x, y = sp.symbols("x y", real=True)
    radius = 0.9

    def chi(pts, t):
        return taylor.mollifier(np.asarray(pts) / (radius * t))

    base = structured_triangulation((-1.0, -1.0), (1.0, 1.0), 4, 4)
    rule = build_rule(base, w, 10)
    shifts = []
    for c in coeffs:
        vals = sum(ci * rule.x[:, 0] ** a * rule.x[:, 1] ** b for ci, (a, b) in zip(c, mons))
        shifts.append(rule.integrate(vals) / rule.integrate(np.ones(rule.num_points)))
    rows = []
    first = None
    for j in range(cfg.get("problem", "dilations") + 1):
        t = 2.0**-j
        mesh = structured_triangulation((-t, -t), (t, t), 4, 4)
        samples = []
        for c, s0 in zip(coeffs, shifts):
            expr = sum(sp.Float(ci, 17) * (x / t) ** a * (y / t) ** b for ci, (a, b) in zip(c, mons)) - sp.Float(s0, 17)
            samples.append(SmoothFunction.from_expression(expr, dim=2, max_order=1))
        res = taylor.poincare_probe(mesh, w, p, lambda pts, t=t: chi(pts, t), samples)
        scaled = np.asarray(res.ratios) / t
        if first is None:
            first = scaled
        drift = float(np.max(np.abs(scaled - first) / first))
        rows.append((j, t, float(np.max(res.ratios)), float(np.max(scaled)), drift))
    rep = ConvergenceReport(cfg.kind, cfg.name, ["dilation", "t", "max_ratio", "max_scaled_ratio", "dilation_drift"],
                            rows, "t", [])
    top = rows[0][3]
    rep.flags["bounded"] = all(r[3] <= 1.05 * top for r in rows)
    rep.flags["max_dilation_drift"] = max(r[4] for r in rows)
    return _finish(rep, cfg)


# ---------------------------------------------------------------------------
# Galerkin studies
# ---------------------------------------------------------------------------


def manufactured_load(u_expr: sp.Expr, syms, w: Weight) -> sp.Expr:
    """``g`` with ``-div(w grad u) = w g`` for constant or power weights."""
    lap = sum(sp.diff(u_expr, s, 2) for s in syms)
    if w.kind == "constant":
        return -lap
    if w.kind != "power":
        raise MuckfemError("manufactured loads need a constant or power weight")
    c = [sp.Float(ci, 17) for ci in w.center]
    r2 = sum((s - ci) ** 2 for s, ci in zip(syms, c))
    drift = sum((s - ci) * sp.diff(u_expr, s) for s, ci in zip(syms, c))
    return -lap - sp.Float(w.exponent, 17) * drift / r2


def run_elliptic_rate(cfg: ExperimentConfig) -> ConvergenceReport:
    meshes, dim = _simplicial_levels(cfg)
    w = cfg.weight(dim=dim)
    tol = cfg.get("tolerances", "solver")
    syms = sp.symbols(("x", "y")[:dim], real=True)
    default = "x*(1-x)" if dim == 1 else "x*(1-x)*y*(1-y)"
    u_expr = sp.sympify(cfg.get("problem", "solution") or default, locals={s.name: s for s in syms})
    u = SmoothFunction.from_expression(u_expr, dim=dim, max_order=3)
    g = SmoothFunction.from_expression(manufactured_load(u_expr, syms, w), dim=dim, max_order=0)

    def compute(level):
        mesh = meshes[level]
        V = FESpace(mesh, 1)
        sol = fem.solve_weighted_elliptic(w, fem.WeightedSource(g, w), V, tol)
        err = weighted_seminorm(Difference(u, sol.U), w, 2, 1, mesh)
        l2 = weighted_lp_norm(Difference(u, sol.U), w, 2, mesh)
        best = weighted_seminorm(Difference(u, quasi_interpolate(u, V)), w, 2, 1, mesh)
        return (level, mesh.max_h, V.num_dofs, err, l2, best, sol.residual)

    cols = ["level", "h", "ndof", "energy_error", "l2_error", "interpolant_energy_error", "residual"]
    rep = ConvergenceReport(cfg.kind, cfg.name, cols, _levels(cfg, compute), "h", ["energy_error", "l2_error"])
    rep.flags["max_residual"] = float(max(r[6] for r in rep.rows))
    rep.flags["cea_holds"] = all(r[3] <= r[5] + tol for r in rep.rows)
    return _finish(rep, cfg)


def run_dirac_rate(cfg: ExperimentConfig) -> ConvergenceReport:
    """Errors of each level against one solution on a mesh two refinements past the finest."""
    meshes, dim = _simplicial_levels(cfg)
    if dim != 2:
        raise MuckfemError("the point-source study runs on a 2D domain")
    x0 = parse_floats(cfg.get("problem", "x0"))
    tol = cfg.get("tolerances", "solver")
    ref_mesh = refine_uniform(refine_uniform(meshes[-1]))
    ref = fem.solve_dirac(x0, FESpace(ref_mesh, 1), tol).U
    ref_rule = build_rule(ref_mesh, Weight.constant(2), 4)
    ref_vals = ref(ref_rule.x)
    lo, hi = np.asarray(ref_mesh.lower), np.asarray(ref_mesh.upper)
    varpi = Weight.dirac_log(x0, float(np.linalg.norm(hi - lo)))

    def compute(level):
        mesh = meshes[level]
        U = fem.solve_dirac(x0, FESpace(mesh, 1), tol).U
        err = math.sqrt(ref_rule.integrate((U(ref_rule.x) - ref_vals) ** 2))
        grad = weighted_seminorm(U, varpi, 2, 1, mesh, degree=4)
        return (level, mesh.max_h, U.space.num_dofs, err, grad)

    rep = ConvergenceReport(cfg.kind, cfg.name, ["level", "h", "ndof", "l2_error", "grad_varpi_norm"],
                            _levels(cfg, compute), "h", ["l2_error"])
    g = rep.column("grad_varpi_norm")
    inc = np.abs(np.diff(g)) / g[:-1]
    rep.flags["reference_elements"] = ref_mesh.num_elements
    rep.flags["last_increments"] = ";".join(repr(float(v)) for v in inc[-2:])
    rep.flags["bounded_gradient"] = bool(np.all(inc[-2:] < 0.1))
    return _finish(rep, cfg)


def _sine_coefficients(expr: str) -> dict[int, float] | None:
    """Exact sine coefficients when ``expr`` is a finite sum of ``c sin(k pi x)``."""
    x = sp.Symbol("x", real=True)
    e = sp.expand(sp.sympify(expr, locals={"x": x}))
    out: dict[int, float] = {}
    for term in sp.Add.make_args(e):
        c, rest = term.as_independent(x)
        if not isinstance(rest, sp.sin):
            return None
        k = sp.simplify(rest.args[0] / (sp.pi * x))
        if not (k.is_integer and k > 0):
            return None
        out[int(k)] = out.get(int(k), 0.0) + float(c)
    return out


def run_fractional_rate(cfg: ExperimentConfig) -> ConvergenceReport:
    s = cfg.get("problem", "s")
    mode = cfg.get("problem", "mode")
    M0 = cfg.get("problem", "intervals")
    grading = cfg.get("problem", "grading") or None
    trunc = cfg.get("problem", "truncation_factor")
    tol = cfg.get("tolerances", "solver")
    rhs = cfg.get("problem", "rhs")
    coeffs = _sine_coefficients(rhs)
    oracle = fem.spectral_oracle(coeffs if coeffs is not None else rhs, s)
    one = Weight.constant(1)

    def problem(M, f_mode=mode):
        return fem.ExtensionProblem(s, M, grading=grading, mode=f_mode, truncation_factor=trunc)

    def compute(level):
        prob = problem(M0 * 2**level)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", InvalidGrading)
            U, tr, sol = fem.solve_fractional(prob, rhs, tol)
        err = weighted_lp_norm(Difference(oracle.function, tr), one, 2, tr.space.mesh)
        energy = fem.energy_error(prob, sol, coeffs) if coeffs is not None else float("nan")
        return (level, prob.intervals, U.space.num_dofs, prob.Y, err, energy)

    rows = _levels(cfg, compute)
    norms = ["trace_l2_error"] + (["energy_error"] if coeffs is not None else [])
    rep = ConvergenceReport(cfg.kind, cfg.name, ["level", "M", "ndof", "Y", "trace_l2_error", "energy_error"],
                            rows, "ndof", norms)
    rep.flags["oracle_remainder_bound"] = oracle.remainder_bound
    rep.flags["normalization_d_s"] = fem.extension_constant(s)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InvalidGrading)
        first = problem(M0)
        proxy = fem.truncation_proxy(first, rhs)
        rep.flags["truncation_proxy_ratio"] = proxy / rows[0][4]
        ds = validate_normalization(s, M0 * 2 ** (cfg.levels - 1), mode, grading, trunc, tol)
    rep.flags.update(ds)
    return _finish(rep, cfg)


def validate_normalization(s, M, mode="graded", grading=None, truncation_factor=0.5, tol=fem.CG_TOL) -> dict:
    """First-mode amplitude of the trace for ``f = sin(pi x)`` against ``pi^(-2s)``.

    The amplitude error times ``1/sqrt(2)`` is bounded by the trace L^2 error
    (Bessel), which is the discretization error of the same run.
    """
    prob = fem.ExtensionProblem(s, M, grading=grading, mode=mode, truncation_factor=truncation_factor)
    _, tr, _ = fem.solve_fractional(prob, "sin(pi*x)", tol)
    mesh = tr.space.mesh
    rule = build_rule(mesh, Weight.constant(1), 8)
    amp = 2.0 * rule.integrate(tr(rule.x) * np.sin(math.pi * rule.x[:, 0]))
    exact = math.pi ** (-2.0 * s)
    u = SmoothFunction.from_expression(f"{exact!r}*sin(pi*x)", dim=1)
    disc = weighted_lp_norm(Difference(u, tr), Weight.constant(1), 2, mesh)
    gap = abs(amp - exact) / math.sqrt(2.0)
    return {
        "d_s_mode_amplitude": amp,
        "d_s_expected_amplitude": exact,
        "d_s_amplitude_gap": gap,
        "d_s_discretization_error": disc,
        "d_s_validated": bool(gap <= disc * (1.0 + 1e-9)),
    }


RUNNERS = {
    "interp-rate": run_interp_rate,
    "aniso-rate": run_aniso_rate,
    "ap-check": run_ap_check,
    "poincare": run_poincare,
    "elliptic-rate": run_elliptic_rate,
    "dirac-rate": run_dirac_rate,
    "fractional-rate": run_fractional_rate,
    "metrics-check": run_metrics_check,
}


def run_experiment(cfg: ExperimentConfig) -> ConvergenceReport:
    start = time.perf_counter()
    rep = RUNNERS[cfg.kind](cfg)
    rep.wall_time = time.perf_counter() - start
    return rep


def list_experiments() -> list[tuple[str, str]]:
    return [(k, DESCRIPTIONS[k]) for k in RUNNERS]
