"""Gaussian smooth transition vector autoregression."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .params import ModelOrder, ParameterVector, RegimeParameters
from .model import (
    SeriesMatrix,
    conditional_moments,
    log_likelihood,
    mvn_log_density,
    regime_stationary_covariance,
    regime_unconditional_mean,
    simulate,
    transition_weights,
)
from .stationarity import (
    JsrCertificate,
    check_necessary,
    check_sufficient,
    companion_matrix,
    jsr_bounds,
    spectral_radius,
)
from .estimation import (
    EstimationConfig,
    FittedModel,
    fit,
    identify,
    information_criteria,
    wald_constancy_test,
)
