"""Two-phase maximum likelihood: genetic algorithm followed by quasi-Newton refinement."""

from __future__ import annotations

import logging
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from ._kernels import flat_loglik
from .errors import (
    AllRoundsFailed,
    InvalidData,
    InvalidParameters,
    NoAdequateSolution,
    NoFeasibleIndividual,
    NotPositiveDefinite,
    NumericalFailure,
    SingularHessian,
    TiedAlphas,
)
from .model import as_values, history_matrix, log_likelihood
from .params import ModelOrder, ParameterVector, unvech, vech, vech_indices
from .stationarity import JsrCertificate, check_sufficient

logger = logging.getLogger(__name__)

STATUS_CONVERGED = "converged"
STATUS_MAX_ITER = "max_iter"
STATUS_BOUNDARY = "boundary"
STATUS_FAILED = "failed"
STATUS_FILTERED = "filtered"


@dataclass(frozen=True)
class EstimationConfig:
    rounds: int = 16
    ga_generations: int = 60
    ga_population: int | None = None  # default: 2 * n_params capped at 400
    mutation_rate: float = 0.5
    stationarity_margin: float = 0.02
    min_regime_obs_fraction: float = 0.01
    min_omega_eigenvalue: float = 1e-5  # relative to the data's column variances
    gradient_step: float = 6e-6
    max_refine_iterations: int = 500
    seed: int = 0
    tournament_size: int = 3
    elitism: int = 2
    compute_hessian: bool = False
    jsr_tolerance: float = 1e-2
    jsr_max_products: int = 10**6
    threads: int = 1

    def __post_init__(self):
        for name in ("rounds", "ga_generations", "max_refine_iterations", "tournament_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.ga_population is not None and self.ga_population < 4:
            raise ValueError("ga_population must be at least 4")
        if not 0.0 <= self.stationarity_margin < 1.0:
            raise ValueError("stationarity_margin must lie in [0, 1)")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")
        if self.min_regime_obs_fraction < 0 or self.gradient_step <= 0:
            raise ValueError("min_regime_obs_fraction must be >= 0 and gradient_step > 0")
        if self.min_omega_eigenvalue < 0:
            raise ValueError("min_omega_eigenvalue must be >= 0")

    def population_size(self, order: ModelOrder) -> int:
        if self.ga_population is not None:
            return self.ga_population
        return int(min(2 * order.n_params, 400))


@dataclass(frozen=True)
class RoundResult:
    index: int
    loglik: float
    status: str
    params: ParameterVector | None = field(default=None, repr=False)


@dataclass(frozen=True)
class FittedModel:
    params: ParameterVector
    loglik: float
    data_T: int
    jsr: JsrCertificate | None = None
    rounds_summary: tuple = ()
    hessian: np.ndarray | None = field(default=None, repr=False)
    seed: int | None = None

    @property
    def order(self) -> ModelOrder:
        return self.params.order


@dataclass(frozen=True)
class WaldResult:
    statistic: float
    df: int
    p_value: float
    restriction: str


# ---------------------------------------------------------------------------
# parameter transforms


def _alpha_slice(order: ModelOrder) -> slice:
    start = order.M * order.regime_block_size
    return slice(start, start + order.M - 1)


def _omega_offset(order: ModelOrder) -> int:
    d, p, M = order.d, order.p, order.M
    return M * (d + d * d * p)


def flat_to_unconstrained(theta: np.ndarray, order: ModelOrder) -> np.ndarray:
    """Map a flat parameter to unconstrained coordinates.

    Covariances become lower Cholesky factors with log-diagonal and alphas become
    additive log-ratios ``log(alpha_m / alpha_M)``; the rest passes through.
    """
    theta = np.asarray(theta, dtype=float)
    d, M = order.d, order.M
    nv = d * (d + 1) // 2
    u = theta.copy()
    off = _omega_offset(order)
    r, c = vech_indices(d)
    diag = r == c
    for m in range(M):
        sl = slice(off + m * nv, off + (m + 1) * nv)
        omega = unvech(theta[sl], d)
        try:
            chol = np.linalg.cholesky(omega)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite("covariance is not positive definite") from exc
        v = chol[r, c]
        v[diag] = np.log(v[diag])
        u[sl] = v
    head = theta[_alpha_slice(order)]
    last = 1.0 - head.sum()
    if np.any(head <= 0) or last <= 0:
        raise InvalidParameters("alphas must be positive")
    u[_alpha_slice(order)] = np.log(head / last)
    return u


def unconstrained_to_flat(u: np.ndarray, order: ModelOrder) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    d, M = order.d, order.M
    nv = d * (d + 1) // 2
    theta = u.copy()
    off = _omega_offset(order)
    r, c = vech_indices(d)
    diag = r == c
    for m in range(M):
        sl = slice(off + m * nv, off + (m + 1) * nv)
        v = u[sl].copy()
        # far-off trial points overflow to inf and are rejected by the likelihood
        with np.errstate(over="ignore", invalid="ignore"):
            v[diag] = np.exp(v[diag])
            chol = np.zeros((d, d))
            chol[r, c] = v
            theta[sl] = vech(chol @ chol.T)
    z = np.append(u[_alpha_slice(order)], 0.0)
    z = np.exp(z - z.max())
    theta[_alpha_slice(order)] = (z / z.sum())[:-1]
    return theta


def to_unconstrained(params: ParameterVector) -> np.ndarray:
    return flat_to_unconstrained(params.to_flat(), params.order)


def from_unconstrained(u, order: ModelOrder) -> ParameterVector:
    return ParameterVector.from_flat(unconstrained_to_flat(u, order), order)


# ---------------------------------------------------------------------------
# identification


def identify(params: ParameterVector) -> ParameterVector:
    """Relabel regimes so that ``alpha_1 > ... > alpha_M``."""
    a = params.alphas
    order = np.argsort(-a, kind="stable")
    sorted_a = a[order]
    if np.any(np.abs(np.diff(sorted_a)) <= 1e-12):
        raise TiedAlphas("two transition weight parameters coincide")
    out = params.permuted(order)
    return ParameterVector(out.order, out.regimes, out.alphas, identified=True)


# ---------------------------------------------------------------------------
# least squares helpers (also used to seed the GA)


def ols_var(y: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Conditional least-squares VAR(p): intercept (d,), [A_1..A_p] (d, dp), ML covariance."""
    y = as_values(y)
    X = np.hstack([np.ones((y.shape[0] - p, 1)), history_matrix(y, p)])
    Y = y[p:]
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    resid = Y - X @ coef
    omega = resid.T @ resid / Y.shape[0]
    return coef[0], coef[1:].T, omega


def _flat_from_blocks(order: ModelOrder, phis, ar_stacks, omegas, alphas) -> np.ndarray:
    d, p = order.d, order.p
    parts = [np.asarray(f, float) for f in phis]
    for a in ar_stacks:
        for i in range(p):
            parts.append(a[:, i * d:(i + 1) * d].reshape(-1, order="F"))
    parts += [vech(w) for w in omegas]
    parts.append(np.asarray(alphas, float)[:-1])
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# objective and repair


class _Objective:
    """Log-likelihood in unconstrained coordinates; -inf off the feasible set."""

    def __init__(self, y: np.ndarray, order: ModelOrder, margin: float):
        self.y = np.ascontiguousarray(y, dtype=float)
        self.order = order
        self.cap = 1.0 - margin
        self.n_eval = 0

    def flat(self, theta: np.ndarray) -> float:
        self.n_eval += 1
        o = self.order
        return float(flat_loglik(np.ascontiguousarray(theta), self.y, o.d, o.p, o.M, self.cap))

    def __call__(self, u: np.ndarray) -> float:
        try:
            theta = unconstrained_to_flat(u, self.order)
        except (FloatingPointError, ValueError):
            return -np.inf
        if not np.all(np.isfinite(theta)):
            return -np.inf
        return self.flat(theta)


def _ar_blocks(order: ModelOrder) -> list[np.ndarray]:
    d, p, M = order.d, order.p, order.M
    start = M * d
    size = d * d * p
    return [np.arange(start + m * size, start + (m + 1) * size) for m in range(M)]


def _companion_from_flat(theta: np.ndarray, idx: np.ndarray, d: int, p: int) -> np.ndarray:
    comp = np.zeros((d * p, d * p))
    vals = theta[idx]
    for i in range(p):
        comp[:d, i * d:(i + 1) * d] = vals[i * d * d:(i + 1) * d * d].reshape((d, d), order="F")
    if p > 1:
        comp[d:, :-d] = np.eye(d * (p - 1))
    return comp


def max_radius_flat(theta: np.ndarray, order: ModelOrder) -> float:
    return max(
        float(np.max(np.abs(np.linalg.eigvals(_companion_from_flat(theta, idx, order.d, order.p)))))
        for idx in _ar_blocks(order)
    )


def repair_stationarity(u: np.ndarray, order: ModelOrder, margin: float,
                        max_steps: int = 50) -> tuple[np.ndarray, bool]:
    """Shrink the AR matrices of every regime that violates ``rho < 1 - margin``.

    Lag i is scaled by ``c**i``, which scales the companion eigenvalues by ``c``.
    Returns the repaired vector and whether any repair was needed.
    """
    d, p = order.d, order.p
    u = np.array(u, dtype=float)
    cap = 1.0 - margin
    touched = False
    for idx in _ar_blocks(order):
        for _ in range(max_steps):
            rho = float(np.max(np.abs(np.linalg.eigvals(_companion_from_flat(u, idx, d, p)))))
            if rho < cap:
                break
            touched = True
            c = 0.98 * cap / rho
            for i in range(p):
                u[idx[i * d * d:(i + 1) * d * d]] *= c ** (i + 1)
    return u, touched


# ---------------------------------------------------------------------------
# genetic algorithm


def _regime_slices(order: ModelOrder) -> list[np.ndarray]:
    """Flat indices of each regime's (phi, AR, covariance) block."""
    d, M = order.d, order.M
    nv = d * (d + 1) // 2
    ar = _ar_blocks(order)
    off = _omega_offset(order)
    return [
        np.concatenate([np.arange(m * d, (m + 1) * d), ar[m], np.arange(off + m * nv, off + (m + 1) * nv)])
        for m in range(M)
    ]


def _random_individual(y: np.ndarray, order: ModelOrder, rng: np.random.Generator) -> np.ndarray:
    """Each regime is a least-squares VAR on a random stretch of the data, jittered."""
    d, p, M = order.d, order.p, order.M
    T = y.shape[0] - p
    min_len = min(T, max(10 * (1 + d * p), T // (2 * M)))
    phis, ars, omegas = [], [], []
    for _ in range(M):
        length = int(rng.integers(min_len, T + 1)) if M > 1 else T
        start = int(rng.integers(0, T - length + 1))
        seg = y[start:start + length + p]
        try:
            phi, ar, omega = ols_var(seg, p)
            np.linalg.cholesky(omega)
        except (np.linalg.LinAlgError, ValueError):
            phi, ar, omega = ols_var(y, p)
        if M > 1:
            ar = ar + rng.normal(0.0, 0.05, ar.shape)
            phi = phi + rng.normal(0.0, 0.1, phi.shape) * np.sqrt(np.diag(omega))
            omega = omega * np.exp(rng.normal(0.0, 0.2))
        phis.append(phi)
        ars.append(ar)
        omegas.append(omega)
    alphas = rng.dirichlet(np.full(M, 2.0)) if M > 1 else np.ones(1)
    alphas = np.clip(alphas, 0.02, None)
    alphas /= alphas.sum()
    theta = _flat_from_blocks(order, phis, ars, omegas, alphas)
    return flat_to_unconstrained(theta, order)


def _mutate(u: np.ndarray, rng: np.random.Generator, scale: float) -> np.ndarray:
    mask = rng.random(u.shape[0]) < max(0.1, 3.0 / u.shape[0])
    if not mask.any():
        mask[rng.integers(u.shape[0])] = True
    out = u.copy()
    out[mask] += rng.normal(0.0, scale, mask.sum())
    return out


def _crossover(a: np.ndarray, b: np.ndarray, blocks: list[np.ndarray], alpha_idx: slice,
               rng: np.random.Generator) -> np.ndarray:
    child = a.copy()
    for idx in blocks:
        if rng.random() < 0.5:
            child[idx] = b[idx]
    if rng.random() < 0.5:
        child[alpha_idx] = b[alpha_idx]
    return child


@dataclass
class GaTrace:
    best_fitness: list = field(default_factory=list)
    n_eval: int = 0


def ga_search(data, order: ModelOrder, config: EstimationConfig, round_seed=0,
              initial_population=None, trace: GaTrace | None = None) -> ParameterVector:
    """Genetic-algorithm search for a starting value close to a likelihood mode.

    ``round_seed`` is anything accepted by ``numpy.random.default_rng``.
    ``initial_population`` optionally seeds the first generation with parameter
    vectors; the rest of the population is filled with their mutations.
    """
    y = as_values(data)
    rng = np.random.default_rng(round_seed)
    obj = _Objective(y, order, config.stationarity_margin)
    n_pop = config.population_size(order)
    margin = config.stationarity_margin
    blocks = _regime_slices(order)
    alpha_idx = _alpha_slice(order)

    pop = []
    if initial_population:
        seeds = [to_unconstrained(p) if isinstance(p, ParameterVector) else np.asarray(p, float)
                 for p in initial_population]
        pop.extend(seeds)
        while len(pop) < n_pop:
            base = seeds[int(rng.integers(len(seeds)))]
            pop.append(_mutate(base, rng, 0.05))
    else:
        while len(pop) < n_pop:
            pop.append(_random_individual(y, order, rng))
    pop = [repair_stationarity(u, order, margin)[0] for u in pop[:n_pop]]
    fit = np.array([obj(u) for u in pop])

    n_elite = min(config.elitism, n_pop)
    scales = np.array([0.01, 0.05, 0.2, 0.5])
    for gen in range(config.ga_generations):
        ranking = np.argsort(-fit, kind="stable")
        if trace is not None:
            trace.best_fitness.append(float(fit[ranking[0]]))
        new_pop = [pop[i] for i in ranking[:n_elite]]
        new_fit = [fit[i] for i in ranking[:n_elite]]
        # a few fresh immigrants keep the search from collapsing early
        n_immigrants = 0 if initial_population else max(1, n_pop // 20)
        for _ in range(n_immigrants):
            u = repair_stationarity(_random_individual(y, order, rng), order, margin)[0]
            new_pop.append(u)
            new_fit.append(obj(u))
        while len(new_pop) < n_pop:
            parents = []
            for _ in range(2):
                cand = rng.integers(0, n_pop, config.tournament_size)
                parents.append(pop[cand[np.argmax(fit[cand])]])
            child = _crossover(parents[0], parents[1], blocks, alpha_idx, rng)
            if rng.random() < config.mutation_rate:
                child = _mutate(child, rng, float(rng.choice(scales)))
            child = repair_stationarity(child, order, margin)[0]
            new_pop.append(child)
            new_fit.append(obj(child))
        pop = new_pop
        fit = np.array(new_fit)
    best = int(np.argmax(fit))
    if trace is not None:
        trace.best_fitness.append(float(fit[best]))
        trace.n_eval = obj.n_eval
    if not np.isfinite(fit[best]):
        raise NoFeasibleIndividual("no individual in the final population has a finite likelihood")
    return from_unconstrained(pop[best], order)


# ---------------------------------------------------------------------------
# quasi-Newton refinement


def central_gradient(f: Callable, x: np.ndarray, rel_step: float, f0: float | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    h = rel_step * np.maximum(np.abs(x), 1.0)
    for i in range(x.shape[0]):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        fp, fm = f(xp), f(xm)
        if np.isfinite(fp) and np.isfinite(fm):
            g[i] = (fp - fm) / (2 * h[i])
        elif f0 is not None and np.isfinite(fp):
            g[i] = (fp - f0) / h[i]
        elif f0 is not None and np.isfinite(fm):
            g[i] = (f0 - fm) / h[i]
        else:
            g[i] = 0.0
    return g


@dataclass(frozen=True)
class MaximizeResult:
    x: np.ndarray
    fun: float
    status: str
    iterations: int
    grad: np.ndarray
    hit_infeasible: bool


def quasi_newton_maximize(f: Callable, x0, rel_step: float = 6e-6, gtol: float = 1e-4,
                          ftol: float = 1e-10, max_iter: int = 500) -> MaximizeResult:
    """BFGS ascent with central-difference gradients and backtracking line search.

    Stops when the gradient sup-norm drops below ``gtol`` or when two
    consecutive steps each improve ``f`` by less than ``ftol`` relative.
    Points where ``f`` is not finite are treated as infeasible and cut the step.
    """
    x = np.array(x0, dtype=float)
    fx = f(x)
    if not np.isfinite(fx):
        raise NumericalFailure("objective is not finite at the starting value")
    n = x.shape[0]
    g = central_gradient(f, x, rel_step, fx)
    Hinv = np.eye(n) / max(1.0, np.max(np.abs(g)))
    status = STATUS_MAX_ITER
    hit_infeasible = False
    small_steps = 0
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(g)) < gtol:
            status = STATUS_CONVERGED
            break
        direction = Hinv @ g
        slope = g @ direction
        if slope <= 0:
            Hinv = np.eye(n) / max(1.0, np.max(np.abs(g)))
            direction = Hinv @ g
            slope = g @ direction
        step = 1.0
        accepted = False
        infeasible_now = False
        for _ in range(40):
            xn = x + step * direction
            fn = f(xn)
            if not np.isfinite(fn):
                infeasible_now = True
            elif fn >= fx + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        hit_infeasible = infeasible_now
        if not accepted:
            status = STATUS_CONVERGED if np.max(np.abs(g)) < 10 * gtol else STATUS_MAX_ITER
            break
        gn = central_gradient(f, xn, rel_step, fn)
        s = xn - x
        yv = g - gn  # gradient of -f
        improvement = fn - fx
        x, fx, g = xn, fn, gn
        sy = s @ yv
        if sy > 1e-12:
            rho = 1.0 / sy
            I = np.eye(n)
            Hinv = (I - rho * np.outer(s, yv)) @ Hinv @ (I - rho * np.outer(yv, s)) + rho * np.outer(s, s)
        # one short step after a poor line search is not enough to stop
        small_steps = small_steps + 1 if improvement <= ftol * max(abs(fx), 1.0) else 0
        if small_steps >= 2:
            status = STATUS_CONVERGED
            break
    return MaximizeResult(x, float(fx), status, it, g, hit_infeasible)


def refine(start: ParameterVector, data, config: EstimationConfig):
    """Quasi-Newton refinement of a GA solution in unconstrained coordinates.

    Returns ``(params, loglik, status)``.
    """
    y = as_values(data)
    order = start.order
    obj = _Objective(y, order, config.stationarity_margin)
    u0 = to_unconstrained(start)
    if not np.isfinite(obj(u0)):
        raise NumericalFailure("log-likelihood is not finite at the starting value")
    res = quasi_newton_maximize(obj, u0, rel_step=config.gradient_step, gtol=1e-4, ftol=1e-10,
                                max_iter=config.max_refine_iterations)
    params = from_unconstrained(res.x, order)
    status = res.status
    cap = 1.0 - config.stationarity_margin
    if res.hit_infeasible and max_radius_flat(params.to_flat(), order) > cap - 1e-3:
        status = STATUS_BOUNDARY
    return params, res.fun, status


# ---------------------------------------------------------------------------
# orchestration


def round_seed_sequence(seed: int, round_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(round_index)])


def scaled_omega_eigenvalues(params: ParameterVector, data) -> np.ndarray:
    """Smallest eigenvalue of each ``D^{-1} Omega_m D^{-1}``, D the data's column std devs."""
    y = as_values(data)
    sd = y.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return np.array([np.linalg.eigvalsh(r.omega / np.outer(sd, sd))[0] for r in params.regimes])


def regime_weight_sums(params: ParameterVector, data) -> np.ndarray:
    _, tr = log_likelihood(params, data, return_trace=True)
    return tr.weights.sum(axis=0)


def _run_round(args) -> RoundResult:
    y, order, config, index, initial = args
    try:
        start = ga_search(y, order, config, round_seed_sequence(config.seed, index),
                          initial_population=initial)
        params, ll, status = refine(start, y, config)
        return RoundResult(index, float(ll), status, params)
    except Exception as exc:  # a failed round is recorded, not fatal
        logger.debug("round %d failed: %s", index, exc)
        return RoundResult(index, float("-inf"), STATUS_FAILED, None)


def _resolve_threads(threads: int | None) -> int:
    if threads is None or threads < 1:
        env = os.environ.get("GSTVAR_THREADS")
        threads = int(env) if env else 1
    return max(1, threads)


def fit(data, order: ModelOrder, config: EstimationConfig = EstimationConfig(),
        initial_params: ParameterVector | None = None, progress=None) -> FittedModel:
    """Run ``config.rounds`` GA + refinement rounds and select the best admissible one.

    Rounds whose regimes carry less than ``min_regime_obs_fraction * T`` total
    transition weight, or whose error covariance is numerically singular on the
    data's scale (see ``min_omega_eigenvalue``), are discarded. The winner is relabelled so that the
    alphas are decreasing and its joint spectral radius is bounded.
    """
    y = as_values(data)
    if y.shape[1] != order.d:
        raise InvalidData(f"data has {y.shape[1]} columns, order says d={order.d}")
    T = y.shape[0] - order.p
    if T < 2:
        raise InvalidData("not enough observations")
    if y.shape[0] < order.p + 10 * order.n_params / order.d:
        warnings.warn("few observations relative to the number of parameters", stacklevel=2)
    if config.min_regime_obs_fraction * order.M >= 1:
        raise ValueError("min_regime_obs_fraction * M must be below one")
    initial = [initial_params] if initial_params is not None else None
    tasks = [(y, order, config, i, initial) for i in range(config.rounds)]
    threads = _resolve_threads(config.threads)
    if threads > 1 and config.rounds > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_run_round, tasks))
    else:
        results = [_run_round(t) for t in tasks]

    summary = []
    candidates = []
    for r in results:
        status = r.status
        params = r.params
        if params is not None:
            try:
                params = identify(params)
                sums = regime_weight_sums(params, y)
                if (np.any(sums < config.min_regime_obs_fraction * T)
                        or np.any(scaled_omega_eigenvalues(params, y) < config.min_omega_eigenvalue)):
                    status = STATUS_FILTERED
                else:
                    candidates.append((r.loglik, r.index, params, r.status))
            except TiedAlphas:
                status = STATUS_FAILED
            except Exception:
                status = STATUS_FAILED
        summary.append((r.index, r.loglik, status))
        msg = f"round {r.index}: loglik={r.loglik:.6f} status={status}"
        logger.info(msg)
        if progress is not None:
            print(msg, file=progress)
    if all(r.params is None for r in results):
        raise AllRoundsFailed("every estimation round failed")
    if not candidates:
        raise NoAdequateSolution("every local solution was filtered out")
    best = max(candidates, key=lambda c: (c[0], -c[1]))
    params = best[2]
    loglik = log_likelihood(params, y)
    jsr = check_sufficient(params, config.jsr_tolerance, config.jsr_max_products)
    hess = numerical_hessian(params, y) if config.compute_hessian else None
    return FittedModel(params, loglik, T, jsr, tuple(summary), hess, config.seed)


# ---------------------------------------------------------------------------
# information criteria and inference


def information_criteria(fit: FittedModel) -> dict:
    """AIC, BIC and HQIC divided by the effective sample size."""
    return information_criteria_from(fit.loglik, fit.params.order.n_params, fit.data_T)


def information_criteria_from(loglik: float, k: int, T: float) -> dict:
    return {
        "aic": (-2.0 * loglik + 2.0 * k) / T,
        "bic": (-2.0 * loglik + k * np.log(T)) / T,
        "hqic": (-2.0 * loglik + 2.0 * k * np.log(np.log(T))) / T,
    }


def numerical_hessian(params: ParameterVector, data, rel_step: float = 1e-3) -> np.ndarray:
    """Central second differences of the log-likelihood in the flat parameterisation.

    A coordinate's step is halved while either of its probes leaves the
    admissible set (for example a non positive definite covariance).
    """
    y = np.ascontiguousarray(as_values(data))
    o = params.order
    theta = params.to_flat()

    def f(th):
        return float(flat_loglik(th, y, o.d, o.p, o.M, 1.0 - 1e-10))

    n = theta.shape[0]
    h = rel_step * np.maximum(np.abs(theta), 1.0)
    f0 = f(theta)
    for i in range(n):
        # near the boundary of the admissible set, shrink until both probes are finite
        for _ in range(30):
            e = np.zeros(n)
            e[i] = h[i]
            if np.isfinite(f(theta + e)) and np.isfinite(f(theta - e)):
                break
            h[i] *= 0.5
    H = np.empty((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (f(theta + ei) - 2 * f0 + f(theta - ei)) / h[i] ** 2
        for j in range(i):
            hi, hj = h[i], h[j]
            for _ in range(30):
                a = np.zeros(n)
                a[i] = hi
                b = np.zeros(n)
                b[j] = hj
                val = (f(theta + a + b) - f(theta + a - b) - f(theta - a + b)
                       + f(theta - a - b)) / (4 * hi * hj)
                if np.isfinite(val):
                    break
                hi, hj = 0.5 * hi, 0.5 * hj
            H[i, j] = H[j, i] = val
    return 0.5 * (H + H.T)


def constancy_restriction_matrix(order: ModelOrder, restriction: str) -> np.ndarray:
    """Rows contrast consecutive regimes' intercepts and/or AR coefficients."""
    if restriction not in ("intercepts_and_ar", "ar_only"):
        raise ValueError(f"unknown restriction {restriction!r}")
    d, M = order.d, order.M
    ar = _ar_blocks(order)
    rows = []
    for m in range(M - 1):
        idx_a, idx_b = [], []
        if restriction == "intercepts_and_ar":
            idx_a.append(np.arange(m * d, (m + 1) * d))
            idx_b.append(np.arange((m + 1) * d, (m + 2) * d))
        idx_a.append(ar[m])
        idx_b.append(ar[m + 1])
        for ia, ib in zip(np.concatenate(idx_a), np.concatenate(idx_b)):
            row = np.zeros(order.n_params)
            row[ia] = 1.0
            row[ib] = -1.0
            rows.append(row)
    return np.array(rows)


def wald_constancy_test(fit: FittedModel, data, restriction: str = "intercepts_and_ar") -> WaldResult:
    order = fit.params.order
    if order.M < 2:
        raise ValueError("the constancy test needs at least two regimes")
    H = fit.hessian if fit.hessian is not None else numerical_hessian(fit.params, data)
    if not np.all(np.isfinite(H)):
        raise SingularHessian("Hessian has non-finite entries")
    R = constancy_restriction_matrix(order, restriction)
    r = R @ fit.params.to_flat()
    try:
        middle = R @ np.linalg.solve(-H, R.T)
        stat = float(r @ np.linalg.solve(middle, r))
    except np.linalg.LinAlgError as exc:
        raise SingularHessian(str(exc)) from exc
    if not np.isfinite(stat):
        raise SingularHessian("Wald statistic is not finite")
    stat = max(stat, 0.0)
    df = int(np.linalg.matrix_rank(R))
    return WaldResult(stat, df, float(stats.chi2.sf(stat, df)), restriction)
