"""Exception types raised across the package."""


class MuckfemError(Exception):
    """Base class for every error raised by muckfem."""


class NonIntegrable(MuckfemError):
    """A weighted integral diverges on the requested region."""


class UnsupportedDomain(MuckfemError):
    pass


class UnsupportedWeight(MuckfemError):
    pass


class UnsupportedPair(MuckfemError):
    """The (rho, omega) weight pair is not one of the certified pairs."""


class DerivativeUnavailable(MuckfemError):
    pass


class QuadratureFailure(MuckfemError):
    pass


class PointOutsideMesh(MuckfemError):
    pass


class PointOnBoundary(MuckfemError):
    pass


class SingularAssembly(MuckfemError):
    """An assembled diagonal entry is not strictly positive."""


class SingularMatrix(MuckfemError):
    pass


class SolverDiverged(MuckfemError):
    pass


class DegenerateFit(MuckfemError):
    pass


class ConfigError(MuckfemError):
    pass


class InvalidGrading(UserWarning):
    """Grading exponent below the threshold that guarantees the optimal rate."""
