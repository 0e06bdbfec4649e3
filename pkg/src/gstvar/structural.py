"""Recursive structural analysis: shock recovery, Monte Carlo GIRFs and GFEVDs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyHistorySet,
    InvalidParameters,
    NotPositiveDefinite,
    ScaleDegenerate,
    ZeroDenominator,
)
from .estimation import FittedModel
from .model import (
    PreparedModel,
    _batch_lower_solve,
    as_values,
    batch_moments,
    log_likelihood,
    prepare,
    transition_weights_batch,
)
from .params import ParameterVector


def _params_of(fit) -> ParameterVector:
    return fit.params if isinstance(fit, FittedModel) else fit


def impact_matrix(omega_yt) -> np.ndarray:
    """Lower-triangular ``B_t`` with ``B_t B_t' = Omega_{y,t}``."""
    try:
        return np.linalg.cholesky(np.asarray(omega_yt, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("conditional covariance is not positive definite") from exc


@dataclass(frozen=True)
class ShockRecovery:
    shocks: np.ndarray  # (T, d), row t is B_t^{-1}(y_t - mu_{y,t})
    weights: np.ndarray  # (T, M)


def recover_shocks(fit, data) -> ShockRecovery:
    params = _params_of(fit)
    y = as_values(data)
    _, tr = log_likelihood(params, y, return_trace=True)
    resid = y[params.order.p:] - tr.means
    return ShockRecovery(_batch_lower_solve(tr.chols, resid), tr.weights)


@dataclass(frozen=True)
class History:
    """p previous observations, most recent first."""

    rows: np.ndarray
    origin_index: int | None = None
    weight_at_origin: np.ndarray | None = None
    shock: np.ndarray | None = None  # recovered structural shock at the origin

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2 or not np.all(np.isfinite(rows)):
            raise InvalidParameters("history must be a finite (p, d) matrix")
        object.__setattr__(self, "rows", rows)


@dataclass(frozen=True)
class GirfResult:
    variable_paths: np.ndarray  # (H+1, d)
    weight_paths: np.ndarray  # (H+1, M); row 0 is zero by measurability
    shock_index: int
    delta: float
    scale_factor: float
    repetitions: int
    seed: object
    variable_se: np.ndarray = field(repr=False)  # Monte Carlo standard errors
    weight_se: np.ndarray = field(repr=False)
    variable_rep_std: np.ndarray = field(repr=False)  # std of branch differences across repetitions
    origin_index: int | None = None

    @property
    def horizons(self) -> np.ndarray:
        return np.arange(self.variable_paths.shape[0])

    def scaled(self, factor: float) -> "GirfResult":
        return GirfResult(
            self.variable_paths * factor,
            self.weight_paths * factor,
            self.shock_index,
            self.delta,
            self.scale_factor * factor,
            self.repetitions,
            self.seed,
            self.variable_se * abs(factor),
            self.weight_se * abs(factor),
            self.variable_rep_std * abs(factor),
            self.origin_index,
        )


def _simulate_branches(model: PreparedModel, hist_flat0: np.ndarray, e: np.ndarray):
    """Iterate the model forward for stacked paths.

    ``e`` is (n, H+1, d) structural shocks. Returns observations (n, H+1, d) and
    the transition weights in force at each horizon (n, H+1, M).
    """
    n, H1, d = e.shape
    M = model.params.order.M
    hist = np.repeat(hist_flat0[None, :], n, axis=0)
    ys = np.empty((n, H1, d))
    ws = np.empty((n, H1, M))
    for h in range(H1):
        w = transition_weights_batch(model, hist)
        mean, cov = batch_moments(model, hist, w)
        chol = np.linalg.cholesky(cov)
        y_h = mean + np.einsum("nij,nj->ni", chol, e[:, h, :])
        ys[:, h] = y_h
        ws[:, h] = w
        hist = np.concatenate([y_h, hist[:, :-d]], axis=1) if hist.shape[1] > d else y_h
    return ys, ws


def girf(fit, shock_index: int, delta, history: History | np.ndarray, H: int, R1: int,
         seed=0, model: PreparedModel | None = None) -> GirfResult:
    """Monte Carlo generalized impulse response to structural shock ``shock_index``.

    Each repetition draws H+1 standard-normal shock vectors shared by both
    branches; the shocked branch has element ``shock_index`` of the first draw
    replaced by ``delta``. ``delta`` may also be ``"baseline"`` (keep the drawn
    value, so both branches coincide) or ``"random"`` (an independent standard
    normal value per repetition).
    """
    params = _params_of(fit)
    o = params.order
    if H < 1 or R1 < 1:
        raise ValueError("H and R1 must be positive")
    if not 0 <= shock_index < o.d:
        raise ValueError("shock_index out of range")
    model = model or prepare(params)
    hist = history if isinstance(history, History) else History(history)
    if hist.rows.shape != (o.p, o.d):
        raise InvalidParameters(f"history must have shape {(o.p, o.d)}")
    rng = np.random.default_rng(seed)
    e = rng.standard_normal((R1, H + 1, o.d))
    e_star = e.copy()
    if isinstance(delta, str):
        if delta == "baseline":
            pass
        elif delta == "random":
            e_star[:, 0, shock_index] = rng.standard_normal(R1)
        else:
            raise ValueError(f"unknown delta mode {delta!r}")
        delta_value = float("nan")
    else:
        delta_value = float(delta)
        e_star[:, 0, shock_index] = delta_value
    ys, ws = _simulate_branches(model, hist.rows.reshape(-1), np.concatenate([e_star, e]))
    dy = ys[:R1] - ys[R1:]
    dw = ws[:R1] - ws[R1:]
    dw[:, 0, :] = 0.0
    rep_std = dy.std(axis=0, ddof=1) if R1 > 1 else np.zeros(dy.shape[1:])
    w_std = dw.std(axis=0, ddof=1) if R1 > 1 else np.zeros(dw.shape[1:])
    return GirfResult(
        variable_paths=dy.mean(axis=0),
        weight_paths=dw.mean(axis=0),
        shock_index=shock_index,
        delta=delta_value,
        scale_factor=1.0,
        repetitions=R1,
        seed=seed,
        variable_se=rep_std / np.sqrt(R1),
        weight_se=w_std / np.sqrt(R1),
        variable_rep_std=rep_std,
        origin_index=hist.origin_index,
    )


def data_histories(fit, data) -> list[History]:
    """Every length-p history in the data with its weights and recovered shock."""
    params = _params_of(fit)
    y = as_values(data)
    p = params.order.p
    rec = recover_shocks(params, y)
    out = []
    for k in range(rec.shocks.shape[0]):
        t = p + k  # 0-based row of y_t
        out.append(History(y[t - p:t][::-1], t, rec.weights[k], rec.shocks[k]))
    return out


def regime_histories(fit, data, regime: int, threshold: float = 0.75) -> list[History]:
    """Histories whose transition weight of ``regime`` (0-based) exceeds ``threshold``.

    A non-positive threshold selects every history.
    """
    params = _params_of(fit)
    if not 0 <= regime < params.order.M:
        raise EmptyHistorySet(f"model has no regime {regime}; 0 histories selected")
    hs = data_histories(params, data)
    if threshold > 0:
        hs = [h for h in hs if h.weight_at_origin[regime] > threshold]
    if not hs:
        raise EmptyHistorySet(f"no history has weight above {threshold} for regime {regime}")
    return hs


def stationary_histories(fit, regime: int, n: int, seed=0) -> list[History]:
    """Histories drawn from a regime's stationary distribution."""
    params = _params_of(fit)
    o = params.order
    st = prepare(params).stationary[regime]
    rng = np.random.default_rng(seed)
    draws = st.mean_stack + rng.standard_normal((n, o.d * o.p)) @ st.chol.T
    return [History(dr.reshape(o.p, o.d), None) for dr in draws]


def history_seed(seed: int, history: History, position: int):
    key = history.origin_index if history.origin_index is not None else position
    return np.random.SeedSequence([int(seed), int(key)])


@dataclass(frozen=True)
class GirfCollection:
    results: list
    excluded: list  # origin indices (or positions) of degenerate histories


def girf_collection(fit, histories, shock_index: int, H: int, R1: int, seed=0,
                    mode="data", scale: tuple | None = None) -> GirfCollection:
    """GIRFs for many histories, optionally rescaled to a fixed impact response.

    ``mode`` is ``"data"`` to use the recovered shock at each history's origin
    as the shock size, or a number for a fixed size. ``scale=(i, c)`` rescales
    each averaged GIRF so that variable ``i`` responds by ``c`` on impact.
    """
    params = _params_of(fit)
    model = prepare(params)
    if scale is not None and scale[1] == 0:
        raise ScaleDegenerate("scale target must be non-zero")
    results, excluded = [], []
    for pos, hist in enumerate(histories):
        if isinstance(mode, str):
            if mode != "data":
                raise ValueError(f"unknown mode {mode!r}")
            if hist.shock is None:
                raise ValueError("data mode needs histories carrying recovered shocks")
            delta = float(hist.shock[shock_index])
        else:
            delta = float(mode)
        res = girf(params, shock_index, delta, hist, H, R1, history_seed(seed, hist, pos), model)
        if scale is not None:
            var, target = scale
            impact = res.variable_paths[0, var]
            if abs(impact) < 1e-10:
                excluded.append(hist.origin_index if hist.origin_index is not None else pos)
                continue
            res = res.scaled(target / impact)
        results.append(res)
    return GirfCollection(results, excluded)


@dataclass(frozen=True)
class GfevdResult:
    """``contributions[v, h, j]``: share of shock j in variable v's forecast error at h.

    Variables are the d observables followed by the M transition weights; the
    weight rows are NaN at h=0 because the weights are predetermined.
    """

    contributions: np.ndarray
    horizons: np.ndarray
    n_histories: int


def gfevd(fit, histories, H: int, R1: int, seed=0, delta=None) -> GfevdResult:
    """Generalized forecast error variance decomposition averaged over histories.

    ``delta=None`` uses each history's recovered shocks as the shock sizes and
    signs; a number imposes that size for every shock.
    """
    params = _params_of(fit)
    o = params.order
    d, M = o.d, o.M
    histories = list(histories)
    if not histories:
        raise EmptyHistorySet("gfevd needs at least one history")
    model = prepare(params)
    total = np.zeros((d + M, H + 1, d))
    counts = np.zeros((d + M, H + 1))
    for pos, hist in enumerate(histories):
        sq = np.empty((d + M, H + 1, d))  # cumulative squared responses
        ss = history_seed(seed, hist, pos)
        for j in range(d):
            if delta is None:
                if hist.shock is None:
                    raise ValueError("data-matched shocks need histories carrying recovered shocks")
                dj = float(hist.shock[j])
            else:
                dj = float(delta)
            res = girf(params, j, dj, hist, H, R1, ss, model)
            paths = np.hstack([res.variable_paths, res.weight_paths])  # (H+1, d+M)
            sq[:, :, j] = np.cumsum(paths ** 2, axis=0).T
        denom = sq.sum(axis=2)
        if np.any(denom[:d] <= 0):
            raise ZeroDenominator("every shock has a zero response for some variable")
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = sq / denom[:, :, None]
        ratio[d:, 0, :] = np.nan
        ok = np.isfinite(ratio[:, :, 0])
        total[ok] += ratio[ok]
        counts += ok
    with np.errstate(invalid="ignore", divide="ignore"):
        contrib = total / counts[:, :, None]
    contrib[counts == 0] = np.nan
    return GfevdResult(contrib, np.arange(H + 1), len(histories))
