"""Transition weights, conditional moments, log-likelihood and simulation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from ._kernels import loglik_kernel
from .errors import (
    AllDensitiesUnderflow,
    DimensionMismatch,
    InvalidData,
    NonstationaryRegime,
    NotPositiveDefinite,
    SingularMeanSystem,
)
from .params import ParameterVector, RegimeParameters
from .stationarity import companion_matrix, spectral_radius

LOG_2PI = np.log(2.0 * np.pi)
_KRON_MAX_DIM = 40


@dataclass(frozen=True)
class SeriesMatrix:
    """Observations in chronological order, one row per period."""

    values: np.ndarray
    timestamps: tuple | None = None
    names: tuple | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise InvalidData("series must be a 2-d array")
        if not np.all(np.isfinite(v)):
            bad = np.argwhere(~np.isfinite(v))[0]
            raise InvalidData(f"non-finite value at row {bad[0]}, column {bad[1]}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.timestamps is not None:
            ts = tuple(self.timestamps)
            if len(ts) != v.shape[0]:
                raise InvalidData("timestamps length does not match the number of rows")
            object.__setattr__(self, "timestamps", ts)
        if self.names is not None:
            object.__setattr__(self, "names", tuple(self.names))

    @property
    def T_total(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def as_values(data) -> np.ndarray:
    if isinstance(data, SeriesMatrix):
        return data.values
    v = np.asarray(data, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if not np.all(np.isfinite(v)):
        raise InvalidData("data contains non-finite values")
    return v


def regime_unconditional_mean(regime: RegimeParameters) -> np.ndarray:
    d = regime.d
    lhs = np.eye(d) - sum(regime.ar_mats)
    if np.linalg.cond(lhs) > 1e12:
        raise SingularMeanSystem("I - sum(A) is singular; the regime has a unit root")
    try:
        return np.linalg.solve(lhs, regime.phi0)
    except np.linalg.LinAlgError as exc:
        raise SingularMeanSystem(str(exc)) from exc


def _doubling_lyapunov(a: np.ndarray, q: np.ndarray, tol: float = 1e-12,
                       max_iter: int = 200) -> np.ndarray:
    sigma = q.copy()
    ak = a.copy()
    for _ in range(max_iter):
        step = ak @ sigma @ ak.T
        sigma = sigma + step
        ak = ak @ ak
        if np.max(np.abs(step)) < tol * max(1.0, np.max(np.abs(sigma))):
            break
    return sigma


def regime_stationary_covariance(regime: RegimeParameters, p: int | None = None) -> np.ndarray:
    """Covariance of p consecutive observations of the regime's stationary process.

    Solves ``S = A S A' + Q`` where ``A`` is the companion matrix and ``Q`` holds
    the regime error covariance in its top-left block.
    """
    a = companion_matrix(regime, p)
    if spectral_radius(a) >= 1.0 - 1e-10:
        raise NonstationaryRegime("companion matrix has spectral radius >= 1")
    n, d = a.shape[0], regime.d
    q = np.zeros((n, n))
    q[:d, :d] = regime.omega
    if n <= _KRON_MAX_DIM:
        lhs = np.eye(n * n) - np.kron(a, a)
        sigma = np.linalg.solve(lhs, q.reshape(-1, order="F")).reshape((n, n), order="F")
    else:
        sigma = _doubling_lyapunov(a, q)
    return 0.5 * (sigma + sigma.T)


def mvn_log_density(x, mean, cov) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    k = x.shape[0]
    if mean.shape != (k,) or cov.shape != (k, k):
        raise DimensionMismatch("x, mean and cov dimensions disagree")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("covariance is not positive definite") from exc
    z = solve_triangular(chol, x - mean, lower=True)
    return float(-0.5 * (k * LOG_2PI + z @ z) - np.sum(np.log(np.diag(chol))))


@dataclass(frozen=True)
class _RegimeStationary:
    mean_stack: np.ndarray  # 1_p (x) mu_m
    chol: np.ndarray  # lower Cholesky of Sigma_{m,p}
    log_norm: float  # -0.5 * dp * log(2 pi) - log det(chol)


@dataclass(frozen=True)
class PreparedModel:
    """Per-parameter quantities reused by every weight/moment evaluation."""

    params: ParameterVector
    stationary: tuple
    log_alphas: np.ndarray
    phi: np.ndarray  # (M, d)
    ar: np.ndarray  # (M, d, dp)
    omega: np.ndarray  # (M, d, d)


def prepare(params: ParameterVector) -> PreparedModel:
    p = params.order.p
    parts = []
    for r in params.regimes:
        mu = regime_unconditional_mean(r)
        sigma = regime_stationary_covariance(r, p)
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite("stationary covariance is not positive definite") from exc
        log_norm = -0.5 * sigma.shape[0] * LOG_2PI - float(np.sum(np.log(np.diag(chol))))
        parts.append(_RegimeStationary(np.tile(mu, p), chol, log_norm))
    return PreparedModel(
        params=params,
        stationary=tuple(parts),
        log_alphas=np.log(params.alphas),
        phi=np.array([r.phi0 for r in params.regimes]),
        ar=np.array([r.ar_stack for r in params.regimes]),
        omega=np.array([r.omega for r in params.regimes]),
    )


def _as_prepared(params) -> PreparedModel:
    return params if isinstance(params, PreparedModel) else prepare(params)


def regime_log_densities(model: PreparedModel, hist_flat: np.ndarray) -> np.ndarray:
    """Log stationary densities ``log n_dp(history; 1_p (x) mu_m, Sigma_{m,p})``.

    ``hist_flat`` is (n, dp) with rows ``(y_{t-1}, ..., y_{t-p})``; returns (n, M).
    """
    out = np.empty((hist_flat.shape[0], len(model.stationary)))
    for m, st in enumerate(model.stationary):
        z = solve_triangular(st.chol, (hist_flat - st.mean_stack).T, lower=True,
                             check_finite=False)
        out[:, m] = st.log_norm - 0.5 * np.sum(z * z, axis=0)
    return out


def weights_from_log_densities(log_alphas: np.ndarray, log_dens: np.ndarray) -> np.ndarray:
    """Normalised ``alpha_m n_m / sum_n alpha_n n_n`` computed as a softmax."""
    logw = log_dens + log_alphas
    top = np.max(logw, axis=-1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise AllDensitiesUnderflow("every regime density underflows for this history")
    w = np.exp(logw - top)
    return w / np.sum(w, axis=-1, keepdims=True)


def _flatten_history(history: np.ndarray, d: int, p: int) -> np.ndarray:
    h = np.asarray(history, dtype=float)
    if h.shape == (p, d):
        return h.reshape(1, d * p)
    if h.shape == (d * p,):
        return h.reshape(1, d * p)
    raise DimensionMismatch(f"history must be (p, d) = {(p, d)}, got {h.shape}")


def transition_weights(params, history) -> np.ndarray:
    """Transition weights for one (p, d) history ordered most-recent-first."""
    model = _as_prepared(params)
    o = model.params.order
    flat = _flatten_history(history, o.d, o.p)
    if not np.all(np.isfinite(flat)):
        raise AllDensitiesUnderflow("history contains non-finite values")
    if o.M == 1:
        return np.ones(1)
    return weights_from_log_densities(model.log_alphas, regime_log_densities(model, flat))[0]


def transition_weights_batch(model: PreparedModel, hist_flat: np.ndarray) -> np.ndarray:
    if model.params.order.M == 1:
        return np.ones((hist_flat.shape[0], 1))
    return weights_from_log_densities(model.log_alphas, regime_log_densities(model, hist_flat))


def conditional_moments(params, history, weights) -> tuple[np.ndarray, np.ndarray]:
    model = _as_prepared(params)
    o = model.params.order
    flat = _flatten_history(history, o.d, o.p)[0]
    w = np.asarray(weights, dtype=float)
    if w.shape != (o.M,) or np.any(w < 0) or np.any(w > 1) or abs(w.sum() - 1) > 1e-12:
        raise DimensionMismatch("weights must be a probability vector of length M")
    regime_means = model.phi + model.ar @ flat
    return w @ regime_means, np.einsum("m,mij->ij", w, model.omega)


def batch_moments(model: PreparedModel, hist_flat: np.ndarray, weights: np.ndarray):
    """Conditional means (n, d) and covariances (n, d, d) for stacked histories."""
    means = np.einsum("nm,mi->ni", weights, model.phi)
    for m in range(model.phi.shape[0]):
        means += weights[:, m:m + 1] * (hist_flat @ model.ar[m].T)
    covs = np.einsum("nm,mij->nij", weights, model.omega)
    return means, covs


def history_matrix(values: np.ndarray, p: int) -> np.ndarray:
    """Rows ``(y_{t-1}, ..., y_{t-p})`` for every t = p, ..., T_total - 1 (0-based rows)."""
    T_total = values.shape[0]
    return np.hstack([values[p - 1 - i:T_total - 1 - i] for i in range(p)])


@dataclass(frozen=True)
class LikelihoodTrace:
    weights: np.ndarray  # (T, M)
    means: np.ndarray  # (T, d)
    covs: np.ndarray  # (T, d, d)
    chols: np.ndarray  # (T, d, d)
    terms: np.ndarray = field(repr=False)  # per-t log density


def _batch_cholesky(covs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(covs)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("a conditional covariance is not positive definite") from exc


def _batch_lower_solve(chols: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``L_t z_t = r_t`` for each t by forward substitution over the d columns."""
    n, d = rhs.shape
    z = np.empty_like(rhs)
    for i in range(d):
        acc = rhs[:, i] - np.einsum("nj,nj->n", chols[:, i, :i], z[:, :i])
        z[:, i] = acc / chols[:, i, i]
    return z


def log_likelihood(params, data, return_trace: bool = False):
    """Conditional log-likelihood given the first p rows of ``data``."""
    model = _as_prepared(params)
    o = model.params.order
    y = as_values(data)
    if y.shape[1] != o.d:
        raise DimensionMismatch(f"data has {y.shape[1]} columns, model expects {o.d}")
    if y.shape[0] < o.p + 1:
        raise InvalidData("need at least p + 1 rows")
    if not return_trace:
        total = loglik_kernel(
            np.ascontiguousarray(y), o.p,
            np.array([st.mean_stack for st in model.stationary]),
            np.array([st.chol for st in model.stationary]),
            np.array([st.log_norm for st in model.stationary]),
            model.log_alphas, model.phi, model.ar, model.omega,
        )
        if not np.isfinite(total):
            raise NotPositiveDefinite("log-likelihood is not finite")
        return float(total)
    hist = history_matrix(y, o.p)
    weights = transition_weights_batch(model, hist)
    means, covs = batch_moments(model, hist, weights)
    chols = _batch_cholesky(covs)
    resid = y[o.p:] - means
    z = _batch_lower_solve(chols, resid)
    logdet = np.sum(np.log(np.diagonal(chols, axis1=1, axis2=2)), axis=1)
    terms = -0.5 * (o.d * LOG_2PI + np.sum(z * z, axis=1)) - logdet
    total = float(np.sum(terms))
    if not np.isfinite(total):
        raise NotPositiveDefinite("log-likelihood is not finite")
    return total, LikelihoodTrace(weights, means, covs, chols, terms)


def simulate(params: ParameterVector, T: int, init=0, seed: int = 0,
             return_innovations: bool = False):
    """Simulate ``p + T`` rows: p initial rows followed by T generated observations.

    ``init`` is either a regime index, in which case the initial rows are drawn
    from that regime's stationary distribution, or a (p, d) array of initial
    rows in chronological order. Observations are ``y_t = mu_{y,t} + L_t e_t``
    with ``L_t`` the lower Cholesky factor of ``Omega_{y,t}``.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    model = _as_prepared(params)
    o = model.params.order
    d, p = o.d, o.p
    rng = np.random.default_rng(seed)
    y = np.empty((p + T, d))
    if np.isscalar(init) or np.ndim(init) == 0:
        m = int(init)
        st = model.stationary[m]
        draw = st.mean_stack + st.chol @ rng.standard_normal(d * p)
        # draw is most-recent-first; rows are chronological
        y[:p] = draw.reshape(p, d)[::-1]
    else:
        init = np.asarray(init, dtype=float)
        if init.shape != (p, d):
            raise DimensionMismatch(f"init must have shape {(p, d)}")
        y[:p] = init
    eps = rng.standard_normal((T, d))
    hist = y[:p][::-1].reshape(-1).copy()
    for t in range(T):
        h = hist[None, :]
        w = transition_weights_batch(model, h)
        mean, cov = batch_moments(model, h, w)
        chol = np.linalg.cholesky(cov[0])
        y_t = mean[0] + chol @ eps[t]
        y[p + t] = y_t
        hist = np.concatenate([y_t, hist[:-d]])
    out = SeriesMatrix(y)
    if return_innovations:
        return out, eps
    return out
