"""Finite element approximation in Muckenhoupt-weighted Sobolev spaces."""
from .errors import (
    ConfigError,
    DegenerateFit,
    DerivativeUnavailable,
    InvalidGrading,
    MuckfemError,
    NonIntegrable,
    PointOnBoundary,
    PointOutsideMesh,
    QuadratureFailure,
    SingularAssembly,
    SingularMatrix,
    SolverDiverged,
    UnsupportedDomain,
    UnsupportedPair,
    UnsupportedWeight,
)
from .experiments import ConvergenceReport, fit_order, run_experiment
from .fem import (
    DiracSource,
    EllipticProblem,
    ExtensionProblem,
    LinearSystem,
    TraceSource,
    WeightedSource,
    assemble,
    solve,
    solve_dirac,
    solve_fractional,
    solve_weighted_elliptic,
    spectral_oracle,
)
from .interp import FEFunction, FESpace, quasi_interpolate
from .mesh import Mesh, build_simplicial, build_tensor, graded_partition, refine_uniform
from .quadrature import SmoothFunction, build_rule, weighted_lp_norm, weighted_norm, weighted_seminorm
from .report import emit_report
from .taylor import averaged_taylor, taylor_poly
from .weights import Ball, Weight, dual_weight_identity, estimate_ap_constant, weighted_measure

__version__ = "0.1.0"
