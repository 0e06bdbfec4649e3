"""Residual diagnostics: residuals, auto/cross-correlations, PACF and QQ points."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ZeroVariance
from .model import _batch_lower_solve, as_values, log_likelihood


@dataclass(frozen=True)
class ResidualSet:
    raw: np.ndarray  # y_t - mu_{y,t}
    standardized: np.ndarray  # B_t^{-1} (y_t - mu_{y,t})


def residuals(fit, data) -> ResidualSet:
    params = getattr(fit, "params", fit)
    y = as_values(data)
    _, tr = log_likelihood(params, y, return_trace=True)
    raw = y[params.order.p:] - tr.means
    return ResidualSet(raw, _batch_lower_solve(tr.chols, raw))


def correlation_band(T: int) -> float:
    """Half-width of the 95% band for autocorrelations of iid observations."""
    return 1.96 / np.sqrt(T)


def acf_ccf(series, max_lag: int) -> tuple[np.ndarray, float]:
    """Sample cross-correlations ``out[l, i, j] = corr(x_{i,t}, x_{j,t-l})``.

    Uses full-sample means and lag-0 variances in the denominator. Returns the
    array together with the ``1.96/sqrt(T)`` band.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    T, d = x.shape
    if not 0 <= max_lag < T:
        raise ValueError("max_lag must be below the series length")
    xc = x - x.mean(axis=0)
    var = np.einsum("ti,ti->i", xc, xc) / T
    if np.any(var <= 1e-300):
        raise ZeroVariance("a column is constant")
    out = np.empty((max_lag + 1, d, d))
    for lag in range(max_lag + 1):
        out[lag] = xc[lag:].T @ xc[:T - lag] / T
    out /= np.sqrt(np.outer(var, var))[None]
    idx = np.arange(d)
    out[0, idx, idx] = 1.0
    return out, correlation_band(T)


def squared_std_residual_acf(res: ResidualSet, max_lag: int) -> tuple[np.ndarray, float]:
    return acf_ccf(res.standardized ** 2, max_lag)


def pacf(series, max_lag: int) -> np.ndarray:
    """Partial autocorrelations at lags 1..max_lag by the Durbin-Levinson recursion."""
    x = np.asarray(series, dtype=float).reshape(-1)
    T = x.shape[0]
    if max_lag < 1 or max_lag >= T / 2:
        raise ValueError("max_lag must lie in [1, T/2)")
    r = acf_ccf(x, max_lag)[0][:, 0, 0]
    out = np.empty(max_lag)
    phi = np.zeros(max_lag + 1)
    v = 1.0
    for k in range(1, max_lag + 1):
        num = r[k] - phi[1:k] @ r[1:k][::-1]
        a = num / v
        new = phi.copy()
        new[k] = a
        new[1:k] = phi[1:k] - a * phi[1:k][::-1]
        phi = new
        v *= 1.0 - a * a
        out[k - 1] = a
    return out


def qq_points(column) -> np.ndarray:
    """(theoretical N(0,1) quantile, order statistic) at positions (k - 0.5)/T."""
    x = np.sort(np.asarray(column, dtype=float).reshape(-1))
    T = x.shape[0]
    if T < 2:
        raise ValueError("need at least two observations")
    q = stats.norm.ppf((np.arange(1, T + 1) - 0.5) / T)
    return np.column_stack([q, x])


def correlation_table(acf: np.ndarray, band: float, names=None) -> list[dict]:
    """Long-format rows (lag, i, j, value, band)."""
    L, d, _ = acf.shape
    names = names or [f"y{i + 1}" for i in range(d)]
    rows = []
    for lag in range(L):
        for i in range(d):
            for j in range(d):
                rows.append({"lag": lag, "i": names[i], "j": names[j],
                             "value": float(acf[lag, i, j]), "band": float(band)})
    return rows
