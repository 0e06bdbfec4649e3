"""Exception types raised across the package."""


class GstvarError(Exception):
    """Base class for all package errors."""


class SingularMeanSystem(GstvarError):
    """``I - sum(A)`` is (numerically) singular, i.e. the regime has a unit root."""


class NonstationaryRegime(GstvarError):
    """A regime's companion matrix has spectral radius at or above one."""


class NotPositiveDefinite(GstvarError):
    """A covariance matrix failed its Cholesky factorization."""


class AllDensitiesUnderflow(GstvarError):
    """Every regime log density is -inf for the given history."""


class EigenFailure(GstvarError):
    pass


class DimensionMismatch(GstvarError, ValueError):
    pass


class InvalidParameters(GstvarError, ValueError):
    pass


class InvalidData(GstvarError, ValueError):
    pass


class TiedAlphas(GstvarError):
    """Two transition-weight parameters coincide, so regimes cannot be ordered."""


class NoFeasibleIndividual(GstvarError):
    pass


class NumericalFailure(GstvarError):
    pass


class AllRoundsFailed(GstvarError):
    pass


class NoAdequateSolution(GstvarError):
    """Every estimation round was filtered out (e.g. a near-empty regime)."""


class SingularHessian(GstvarError):
    pass


class EmptyHistorySet(GstvarError):
    pass


class ScaleDegenerate(GstvarError):
    pass


class ZeroDenominator(GstvarError):
    pass


class ZeroVariance(GstvarError):
    pass
