import io
import math

import numpy as np
import pytest
from scipy import sparse

from muckfem.errors import InvalidGrading, PointOnBoundary, SingularMatrix, SolverDiverged
from muckfem.fem import (
    DiracSource,
    EllipticProblem,
    ExtensionProblem,
    LinearSystem,
    assemble,
    extension_constant,
    pcg,
    solve,
    solve_dirac,
    solve_fractional,
    solve_weighted_elliptic,
    spectral_oracle,
)
from muckfem.interp import FESpace
from muckfem.mesh import build_simplicial, build_tensor
from muckfem.quadrature import SmoothFunction
from muckfem.weights import Weight


def test_1d_stiffness_is_classical_tridiagonal():
    h = 0.125
    space = FESpace(build_simplicial((0, 1), h), 1)
    A = assemble(EllipticProblem(space, Weight.constant(1))).matrix.toarray()
    i = 4
    np.testing.assert_allclose(A[i, i - 1:i + 2], np.array([-1.0, 2.0, -1.0]) / h, rtol=1e-13)


def test_stiffness_symmetric_with_singular_weight():
    space = FESpace(build_simplicial("unit-square", 0.2), 1)
    A = assemble(EllipticProblem(space, Weight.power([0.5, 0.5], 0.5))).matrix
    assert abs(A - A.T).max() <= 1e-12 * abs(A).max()


def test_dirac_load_partition_of_unity():
    space = FESpace(build_simplicial("unit-square", 0.3), 1)
    sys_ = assemble(EllipticProblem(space, Weight.constant(2), DiracSource((0.37, 0.61))))
    assert sys_.load.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.count_nonzero(sys_.load) <= 3


def test_identity_system():
    space = FESpace(build_simplicial((0, 1), 0.25), 1)
    n = space.num_dofs
    fixed = space.boundary.copy()
    b = np.arange(n, dtype=float)
    system = LinearSystem(sparse.identity(n, format="csr"), b, fixed)
    U = solve(system, space)
    np.testing.assert_allclose(U.coeffs[~fixed], b[~fixed])
    assert np.all(U.coeffs[fixed] == 0.0)


def test_1d_poisson_nodal_values():
    # P1 Galerkin in 1D is nodally exact up to quadrature of the load
    space = FESpace(build_simplicial((0, 1), 1 / 16), 1)
    f = SmoothFunction.from_expression("pi**2*sin(pi*x)")
    U = solve_weighted_elliptic(Weight.constant(1), f, space).U
    np.testing.assert_allclose(U.coeffs, np.sin(np.pi * space.coords[:, 0]), atol=1e-9)


def test_cg_matches_direct():
    space = FESpace(build_simplicial("unit-square", 0.1), 1)
    f = SmoothFunction.from_expression("1 + x*y")
    a = solve_weighted_elliptic(Weight.power([0.5, 0.5], 0.5), f, space, method="direct").U
    b = solve_weighted_elliptic(Weight.power([0.5, 0.5], 0.5), f, space, method="cg", tol=1e-12).U
    np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-9)


def test_indefinite_rejected():
    A = sparse.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(SingularMatrix):
        pcg(A, np.array([1.0, 0.0]))


def test_cg_iteration_cap():
    n = 50
    A = sparse.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")
    with pytest.raises(SolverDiverged):
        pcg(A, np.ones(n), tol=1e-14, maxiter=3)


def test_nonsymmetric_smoke():
    space = FESpace(build_simplicial("unit-square", 0.2), 1)
    prob = EllipticProblem(space, Weight.constant(2), 1.0, advection=lambda x: np.tile([1.0, 0.5], (len(x), 1)),
                           reaction=1.0)
    system = assemble(prob)
    assert not system.symmetric
    U = solve(system, space)
    assert system.residual(U.coeffs) < 1e-10
    assert np.all(U.coeffs >= -1e-12)


def test_negative_reaction_rejected():
    space = FESpace(build_simplicial((0, 1), 0.5), 1)
    with pytest.raises(ValueError):
        EllipticProblem(space, Weight.constant(1), reaction=-1.0)


def test_galerkin_orthogonality_residual():
    space = FESpace(build_simplicial("unit-square", 0.1), 1)
    sol = solve_weighted_elliptic(Weight.power([0.5, 0.5], 0.5), SmoothFunction.from_expression("x*y + 1"), space)
    assert sol.residual < 1e-9


def test_dirac_symmetry():
    space = FESpace(build_simplicial("unit-square", math.sqrt(2) / 16), 1)
    U = solve_dirac((0.5, 0.5), space).U
    c = space.coords
    for image in (np.column_stack([c[:, 1], c[:, 0]]), np.column_stack([1 - c[:, 0], 1 - c[:, 1]])):
        np.testing.assert_allclose(U(image), U.coeffs, atol=1e-10)


def test_dirac_on_boundary_rejected():
    space = FESpace(build_simplicial("unit-square", 0.25), 1)
    with pytest.raises(PointOnBoundary):
        solve_dirac((0.0, 0.5), space)


def test_normalization_constant():
    assert extension_constant(0.5) == pytest.approx(1.0, rel=1e-15)
    s = 0.3
    assert extension_constant(s) == pytest.approx(2 ** (1 - 2 * s) * math.gamma(1 - s) / math.gamma(s))


def test_flat_extension_weight_gives_unweighted_assembly():
    mesh = build_tensor([np.linspace(0, 1, 5), np.linspace(0, 2, 4) ** 1])
    space = FESpace(mesh, 1)
    a = assemble(EllipticProblem(space, Weight.extension(0.0, 2))).matrix
    b = assemble(EllipticProblem(space, Weight.constant(2))).matrix
    assert abs(a - b).max() == 0.0


def test_spectral_oracle_single_mode():
    s = 0.3
    u = spectral_oracle({1: 1.0}, s).function
    x = np.array([[0.2], [0.5]])
    np.testing.assert_allclose(u(x), math.pi ** (-2 * s) * np.sin(math.pi * x[:, 0]), rtol=1e-13)


def test_spectral_oracle_near_one_matches_poisson():
    # -u'' = x(1-x) has u = x/12 - x^3/6 + x^4/12
    sol = spectral_oracle(SmoothFunction.from_expression("x*(1-x)"), 0.999999, K=200)
    x = np.linspace(0.05, 0.95, 7)[:, None]
    exact = x[:, 0] / 12 - x[:, 0] ** 3 / 6 + x[:, 0] ** 4 / 12
    np.testing.assert_allclose(sol.function(x), exact, atol=1e-6)
    assert sol.remainder_bound < 1e-6


def test_fractional_trace_first_mode():
    prob = ExtensionProblem(0.5, 32)
    _, tr, _ = solve_fractional(prob, "sin(pi*x)")
    x = np.array([[0.5]])
    assert tr(x)[0] == pytest.approx(1 / math.pi, rel=2e-3)


def test_invalid_grading_warns():
    with pytest.warns(InvalidGrading):
        solve_fractional(ExtensionProblem(0.75, 8, grading=2.0), "sin(pi*x)")


def test_system_dump_counts():
    space = FESpace(build_simplicial((0, 1), 0.25), 1)
    system = assemble(EllipticProblem(space, Weight.constant(1), 1.0))
    buf = io.StringIO()
    system.dump(buf)
    lines = buf.getvalue().splitlines()
    assert lines[1].split() == ["5", "5", str(system.matrix.nnz)]
