"""Galerkin solvers: weighted elliptic problems, Dirac sources, fractional powers.

The fractional problem uses the Caffarelli-Silvestre extension. The
fractional Dirichlet Laplacian on (0,1) is realized as the Neumann-to-
Dirichlet map of a y^alpha-weighted Laplacian on a truncated cylinder.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sp
from scipy import sparse
from scipy.sparse import linalg as spla
from scipy.special import gamma as gamma_fn

from .errors import InvalidGrading, PointOnBoundary, SingularAssembly, SingularMatrix, SolverDiverged
from .interp import FEFunction, FESpace
from .mesh import _interval_mesh, build_tensor, graded_partition
from .quadrature import SmoothFunction, as_field, build_rule, field_values, gauss_legendre01, multi_indices
from .weights import Weight

DIRECT_LIMIT = 200_000
CG_TOL = 1e-10


# ---------------------------------------------------------------------------
# problem data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightedSource:
    """Right-hand side ``f = weight * g``; integrated with the weight-adapted rule."""

    g: object
    weight: Weight


@dataclass(frozen=True)
class DiracSource:
    point: tuple[float, ...]


@dataclass(frozen=True)
class TraceSource:
    """Neumann datum ``factor * f`` on the face ``{y = level}``."""

    f: object
    factor: float = 1.0
    level: float = 0.0


@dataclass
class EllipticProblem:
    space: FESpace
    weight: Weight
    rhs: object = 0.0
    advection: Callable | None = None
    reaction: float | Callable = 0.0
    dirichlet: np.ndarray | None = None
    degree: int | None = None

    def __post_init__(self):
        if self.dirichlet is None:
            self.dirichlet = self.space.boundary.copy()
        if np.isscalar(self.reaction) and self.reaction < 0:
            raise ValueError("reaction coefficient must be nonnegative")


@dataclass
class LinearSystem:
    matrix: sparse.csr_matrix
    load: np.ndarray
    fixed: np.ndarray
    symmetric: bool = True

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.fixed)

    def reduced(self):
        f = self.free
        return self.matrix[f][:, f].tocsr(), self.load[f]

    def residual(self, coeffs) -> float:
        """Relative residual of the Galerkin equations on the free indices."""
        A, b = self.reduced()
        r = A @ coeffs[self.free] - b
        return float(np.linalg.norm(r) / max(np.linalg.norm(b), 1e-300))

    def dump(self, fh) -> None:
        """Matrix-market style triplets followed by the load vector."""
        coo = self.matrix.tocoo()
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        order = np.lexsort((coo.col, coo.row))
        for i in order:
            fh.write(f"{coo.row[i] + 1} {coo.col[i] + 1} {coo.data[i]!r}\n")
        fh.write("% load\n")
        for v in self.load:
            fh.write(f"{v!r}\n")


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def _local_to_global(space: FESpace, elem_ids: np.ndarray, local: np.ndarray, n: int) -> sparse.csr_matrix:
    dofs = space.cell_dofs[elem_ids]
    k = dofs.shape[1]
    rows = np.repeat(dofs, k, axis=1).ravel()
    cols = np.tile(dofs, (1, k)).ravel()
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _element_accumulate(elem, values, E, k) -> np.ndarray:
    """Sum per-point (P, k, k) contributions into (E, k, k) in a fixed order."""
    idx = (elem[:, None] * (k * k) + np.arange(k * k)[None, :]).ravel()
    return np.bincount(idx, weights=values.reshape(len(elem), -1).ravel(), minlength=E * k * k).reshape(E, k, k)


def assemble(problem: EllipticProblem, rule=None) -> LinearSystem:
    """Stiffness ``int w grad u . grad v + b . grad u v + c u v`` and the load vector."""
    space = problem.space
    mesh = space.mesh
    dim = mesh.dim
    n = space.num_dofs
    k = space.cell_dofs.shape[1]
    deg = problem.degree or 2 * space.degree + 2
    rule = rule or build_rule(mesh, problem.weight, deg)
    E = mesh.num_elements
    grads = [space.basis_derivatives(a, rule.x, rule.elem) for a in multi_indices(dim, 1)]
    contrib = sum(g[:, :, None] * g[:, None, :] for g in grads) * rule.wq[:, None, None]
    local = _element_accumulate(rule.elem, contrib, E, k)
    symmetric = True
    extra = None
    if problem.advection is not None or not (np.isscalar(problem.reaction) and problem.reaction == 0):
        plain = build_rule(mesh, Weight.constant(dim), deg)
        phi = space.basis_derivatives((0,) * dim, plain.x, plain.elem)
        acc = np.zeros((len(plain.wq), k, k))
        if problem.advection is not None:
            b = np.asarray(problem.advection(plain.x), dtype=float).reshape(-1, dim)
            pg = [space.basis_derivatives(a, plain.x, plain.elem) for a in multi_indices(dim, 1)]
            bgrad = sum(b[:, i:i + 1] * pg[i] for i in range(dim))
            # row = test function, column = trial function
            acc += phi[:, :, None] * bgrad[:, None, :]
            symmetric = False
        c = problem.reaction
        cval = np.full(len(plain.wq), float(c)) if np.isscalar(c) else np.asarray(c(plain.x), dtype=float)
        if np.any(cval < 0):
            raise ValueError("reaction coefficient must be nonnegative")
        acc += cval[:, None, None] * phi[:, :, None] * phi[:, None, :]
        extra = _element_accumulate(plain.elem, acc * plain.wq[:, None, None], E, k)
    if extra is not None:
        local = local + extra
    A = _local_to_global(space, np.arange(E), local, n)
    diag = A.diagonal()
    free = ~problem.dirichlet
    if np.any(diag[free] <= 0) or not np.all(np.isfinite(A.data)):
        raise SingularAssembly("nonpositive or non-finite diagonal entry in the stiffness matrix")
    F = assemble_load(space, problem.rhs, deg)
    return LinearSystem(A, F, problem.dirichlet.copy(), symmetric)


def assemble_load(space: FESpace, rhs, degree: int) -> np.ndarray:
    mesh = space.mesh
    dim = mesh.dim
    n = space.num_dofs
    F = np.zeros(n)
    if isinstance(rhs, DiracSource):
        x0 = np.asarray(rhs.point, dtype=float).reshape(1, dim)
        e = space.locate(x0)
        vals = space.basis_derivatives((0,) * dim, x0, e)[0]
        np.add.at(F, space.cell_dofs[e[0]], vals)
        return F
    if isinstance(rhs, TraceSource):
        return _trace_load(space, rhs, degree)
    if isinstance(rhs, WeightedSource):
        rule = build_rule(mesh, rhs.weight, degree)
        g = as_field(rhs.g, dim)
    else:
        if np.isscalar(rhs) and float(rhs) == 0.0:
            return F
        rule = build_rule(mesh, Weight.constant(dim), degree)
        g = as_field(rhs, dim)
    gv = field_values(g, (0,) * dim, rule.x, rule.elem)
    phi = space.basis_derivatives((0,) * dim, rule.x, rule.elem)
    contrib = phi * (gv * rule.wq)[:, None]
    k = phi.shape[1]
    idx = (rule.elem[:, None] * k + np.arange(k)[None, :]).ravel()
    local = np.bincount(idx, weights=contrib.ravel(), minlength=mesh.num_elements * k).reshape(-1, k)
    np.add.at(F, space.cell_dofs, local)
    return F


def _trace_load(space: FESpace, rhs: TraceSource, degree: int) -> np.ndarray:
    """``factor * int f(x) phi(x, level) dx`` over the face ``y = level``."""
    mesh = space.mesh
    if mesh.kind != "tensor" or mesh.dim != 2:
        raise ValueError("trace data needs a 2D tensor mesh")
    xs = mesh.axes[0]
    gx, gw = gauss_legendre01(max(degree, 8))
    a, b = xs[:-1], xs[1:]
    X = (a[:, None] + (b - a)[:, None] * gx[None, :]).ravel()
    W = ((b - a)[:, None] * gw[None, :]).ravel()
    pts = np.column_stack([X, np.full(len(X), rhs.level)])
    e = mesh.locate(pts)
    f = as_field(rhs.f, 1)
    fv = field_values(f, (0,), X[:, None])
    phi = space.basis_derivatives((0, 0), pts, e)
    F = np.zeros(space.num_dofs)
    np.add.at(F, space.cell_dofs[e], phi * (rhs.factor * fv * W)[:, None])
    return F


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------


def pcg(A: sparse.csr_matrix, b: np.ndarray, tol: float = CG_TOL, maxiter: int | None = None) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients with a curvature check."""
    n = len(b)
    maxiter = maxiter or 50 * n
    d = A.diagonal()
    if np.any(d <= 0):
        raise SingularMatrix("matrix has a nonpositive diagonal entry")
    Minv = 1.0 / d
    x = np.zeros(n)
    r = b.copy()
    bn = np.linalg.norm(b)
    if bn == 0:
        return x
    z = Minv * r
    p = z.copy()
    rz = r @ z
    for _ in range(maxiter):
        Ap = A @ p
        curv = p @ Ap
        if curv <= 0:
            raise SingularMatrix("matrix is not positive definite")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= tol * bn:
            return x
        z = Minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverDiverged(f"CG did not reach tolerance {tol} in {maxiter} iterations")


def solve(system: LinearSystem, space: FESpace, method: str = "auto", tol: float = CG_TOL) -> FEFunction:
    """Solve the constrained system; fixed coefficients are exactly zero."""
    A, b = system.reduced()
    if method == "auto":
        method = "direct" if (len(b) <= DIRECT_LIMIT or not system.symmetric) else "cg"
    if method == "direct":
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            try:
                x = spla.spsolve(A.tocsc(), b)
            except (spla.MatrixRankWarning, RuntimeError) as exc:
                raise SingularMatrix(str(exc)) from exc
        if not np.all(np.isfinite(x)):
            raise SingularMatrix("direct solve produced non-finite values")
    elif method == "cg":
        if not system.symmetric:
            raise ValueError("CG needs a symmetric system")
        x = pcg(A, b, tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    c = np.zeros(space.num_dofs)
    c[system.free] = x
    return FEFunction(space, c)


# ---------------------------------------------------------------------------
# applications
# ---------------------------------------------------------------------------


@dataclass
class Solution:
    """Galerkin solution with the data needed for diagnostics."""

    U: FEFunction
    system: LinearSystem

    @property
    def residual(self) -> float:
        return self.system.residual(self.U.coeffs)

    @property
    def energy(self) -> float:
        """``a(U, U) = F . U``."""
        return float(self.system.load @ self.U.coeffs)


def solve_weighted_elliptic(weight: Weight, f, space: FESpace, tol: float = CG_TOL,
                            method: str = "auto") -> Solution:
    """Galerkin solution of ``-div(weight grad u) = f`` with ``u = 0`` on the boundary."""
    system = assemble(EllipticProblem(space, weight, f))
    return Solution(solve(system, space, method, tol), system)


def solve_dirac(x0, space: FESpace, tol: float = CG_TOL, method: str = "auto") -> Solution:
    """Galerkin solution of ``-Laplace u = delta_x0`` with ``u = 0`` on the boundary."""
    mesh = space.mesh
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    lo, hi = np.asarray(mesh.lower), np.asarray(mesh.upper)
    scale = float(np.max(hi - lo))
    if np.any(x0 <= lo + 1e-12 * scale) or np.any(x0 >= hi - 1e-12 * scale):
        raise PointOnBoundary("the Dirac point must lie inside the domain")
    system = assemble(EllipticProblem(space, Weight.constant(mesh.dim), DiracSource(tuple(x0))))
    return Solution(solve(system, space, method, tol), system)


# ---------------------------------------------------------------------------
# fractional powers through the extension
# ---------------------------------------------------------------------------


def extension_constant(s: float) -> float:
    """``d_s = 2^(1-2s) Gamma(1-s) / Gamma(s)``."""
    return float(2.0 ** (1.0 - 2.0 * s) * gamma_fn(1.0 - s) / gamma_fn(s))


def grading_threshold(alpha: float) -> float:
    return 3.0 / (1.0 - alpha)


@dataclass
class ExtensionProblem:
    """Truncated cylinder ``(0,1) x (0,Y)`` for the fractional Laplacian of order ``s``.

    ``intervals`` is M, the number of cells per axis. ``height`` None means
    ``Y = max(1, truncation_factor * log(#cells))``. ``grading`` None means
    ``3/(1-alpha) + 0.1``; it is ignored in uniform mode. ``padding`` extends
    the cylinder above Y without touching the cells below it, which isolates
    the truncation effect.
    """

    s: float
    intervals: int
    height: float | None = None
    grading: float | None = None
    mode: str = "graded"
    truncation_factor: float = 0.5
    base_intervals: int | None = None
    padding: float = 0.0

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ValueError("s must lie in (0, 1)")
        if self.mode not in ("graded", "uniform"):
            raise ValueError("mode must be 'graded' or 'uniform'")

    @property
    def alpha(self) -> float:
        return 1.0 - 2.0 * self.s

    @property
    def normalization(self) -> float:
        return extension_constant(self.s)

    @property
    def gamma(self) -> float:
        if self.mode == "uniform":
            return 1.0
        return self.grading if self.grading is not None else grading_threshold(self.alpha) + 0.1

    @property
    def num_x(self) -> int:
        return self.base_intervals or self.intervals

    @property
    def Y(self) -> float:
        if self.height is not None:
            return float(self.height)
        cells = self.num_x * self.intervals
        return max(1.0, self.truncation_factor * math.log(cells))

    def mesh(self):
        xs = np.linspace(0.0, 1.0, self.num_x + 1)
        ys = graded_partition(self.Y, self.intervals, self.gamma).points
        if self.padding > 0:
            # same cells below Y, extra cells of the top width above it
            step = ys[-1] - ys[-2]
            extra = max(1, math.ceil(self.padding / step - 1e-9))
            ys = np.concatenate([ys, self.Y + np.linspace(0.0, self.padding, extra + 1)[1:]])
        return build_tensor([xs, ys])


def solve_fractional(prob: ExtensionProblem, f, tol: float = CG_TOL, method: str = "auto"):
    """Q1 solution on the cylinder and its trace on ``y = 0``.

    Returns ``(U, trace, solution)``. The trace is a P1 function on the
    base mesh. ``solution`` carries the linear system for diagnostics.
    """
    if prob.mode == "graded" and prob.gamma <= grading_threshold(prob.alpha):
        warnings.warn(
            f"grading {prob.gamma:.3g} does not exceed 3/(1-alpha) = {grading_threshold(prob.alpha):.3g}",
            InvalidGrading,
            stacklevel=2,
        )
    mesh = prob.mesh()
    space = FESpace(mesh, 1)
    c = space.coords
    Y = mesh.upper[1]
    dirichlet = (np.abs(c[:, 0]) < 1e-12) | (np.abs(c[:, 0] - 1.0) < 1e-12) | (np.abs(c[:, 1] - Y) < 1e-12 * Y)
    w = Weight.extension(prob.alpha, 2)
    problem = EllipticProblem(space, w, TraceSource(f, prob.normalization), dirichlet=dirichlet, degree=4)
    system = assemble(problem)
    U = solve(system, space, method, tol)
    trace = trace_of(U)
    return U, trace, Solution(U, system)


def trace_of(U: FEFunction) -> FEFunction:
    """Restriction of a Q1 function to ``y = 0`` as a P1 function."""
    mesh = U.space.mesh
    xs = mesh.axes[0]
    space = FESpace(_interval_mesh(xs), 1)
    return FEFunction(space, U.coeffs[: len(xs)].copy())


def energy_error(prob: ExtensionProblem, sol: Solution, sine_coeffs: dict[int, float]) -> float:
    """Exact energy error ``||grad(u_ext - U)||_{L^2(y^alpha)}`` via Galerkin orthogonality.

    The exact extension has energy ``d_s sum lambda_k^-s f_k^2`` with ``f_k``
    the coefficients in the orthonormal sine basis.
    """
    exact = prob.normalization * sum(
        ((k * math.pi) ** 2) ** (-prob.s) * (c / math.sqrt(2.0)) ** 2 for k, c in sine_coeffs.items()
    )
    return math.sqrt(max(exact - sol.energy, 0.0))


# ---------------------------------------------------------------------------
# spectral oracle
# ---------------------------------------------------------------------------


@dataclass
class SpectralSolution:
    """``u = sum_k lambda_k^-s c_k sin(k pi x)`` with a bound on the discarded tail."""

    function: SmoothFunction
    coefficients: dict[int, float]
    remainder_bound: float


def sine_coefficients(f, K: int, points: int = 4096) -> tuple[dict[int, float], float]:
    """Coefficients of ``f`` in ``sin(k pi x)`` and the squared L^2 norm of ``f``."""
    f = as_field(f, 1)
    gx, gw = gauss_legendre01(64)
    edges = np.linspace(0.0, 1.0, points // 64 + 1)
    X = (edges[:-1, None] + np.diff(edges)[:, None] * gx[None, :]).ravel()
    W = (np.diff(edges)[:, None] * gw[None, :]).ravel()
    fv = field_values(f, (0,), X[:, None])
    coeffs = {k: float(2.0 * np.sum(W * fv * np.sin(k * math.pi * X))) for k in range(1, K + 1)}
    return coeffs, float(np.sum(W * fv**2))


def spectral_oracle(f, s: float, K: int = 64) -> SpectralSolution:
    """Solution of ``(-d^2/dx^2)^s u = f`` on (0,1) with zero boundary values.

    ``f`` is a dict ``{k: c_k}`` of sine coefficients or a function. For a
    function, the remainder bound is ``lambda_(K+1)^-s ||f - f_K||``.
    """
    if isinstance(f, dict):
        coeffs = {int(k): float(v) for k, v in f.items() if int(k) <= K}
        tail = math.sqrt(sum(0.5 * v * v for k, v in f.items() if int(k) > K))
    else:
        coeffs, norm2 = sine_coefficients(f, K)
        kept = sum(0.5 * c * c for c in coeffs.values())
        tail = math.sqrt(max(norm2 - kept, 0.0))
    x = sp.Symbol("x", real=True)
    expr = sum(
        sp.Float(((k * math.pi) ** 2) ** (-s) * c, 17) * sp.sin(k * sp.pi * x) for k, c in coeffs.items() if c != 0
    )
    fn = SmoothFunction.from_expression(sp.sympify(expr) if expr != 0 else sp.Integer(0) * x, dim=1, max_order=4)
    bound = ((K + 1) * math.pi) ** (-2 * s) * tail
    return SpectralSolution(fn, coeffs, bound)


def truncation_proxy(prob: ExtensionProblem, f) -> float:
    """L^2 change of the trace when the cylinder is doubled in height above Y."""
    from dataclasses import replace

    from .quadrature import Difference, weighted_lp_norm

    _, tr, _ = solve_fractional(prob, f)
    _, tr2, _ = solve_fractional(replace(prob, padding=prob.Y), f)
    return weighted_lp_norm(Difference(tr2, tr), Weight.constant(1), 2, tr.space.mesh)
