"""Finite-sample study of the ML estimator on the two bivariate benchmark models."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .estimation import EstimationConfig, fit, identify
from .model import simulate
from .params import ModelOrder, ParameterVector

_OMEGAS = ([[0.50, 0.20], [0.20, 0.30]], [[0.80, -0.20], [-0.20, 0.50]])
_ALPHA1 = 0.70

BENCHMARK_MODELS = {
    1: dict(
        phis=([0.0, 1.0], [1.5, 2.0]),
        ars=([[0.5, -0.3], [0.2, 0.7]], [[-0.1, -0.2], [0.3, 0.5]]),
    ),
    2: dict(
        phis=([0.0, 1.0], [0.5, 0.5]),
        ars=([[0.8, -0.55], [0.4, 0.9]], [[-0.99, -0.2], [0.3, 0.9]]),
    ),
}

BURN_IN = 200


def benchmark_model(which: int) -> ParameterVector:
    """Bivariate, first-order, two-regime benchmark model 1 or 2."""
    spec = BENCHMARK_MODELS[int(which)]
    return ParameterVector.from_arrays(
        spec["phis"], [[np.array(a)] for a in spec["ars"]], _OMEGAS, [_ALPHA1],
        identified=True,
    )


def param_labels(order: ModelOrder) -> list[str]:
    d, p, M = order.d, order.p, order.M
    labels = [f"phi{m + 1}_{i + 1}" for m in range(M) for i in range(d)]
    for m in range(M):
        for lag in range(p):
            # column-major, matching vec()
            labels += [f"A{m + 1}_{lag + 1}_{r + 1}{c + 1}" for c in range(d) for r in range(d)]
    for m in range(M):
        labels += [f"Omega{m + 1}_{r + 1}{c + 1}" for c in range(d) for r in range(c, d)]
    labels += [f"alpha{m + 1}" for m in range(M - 1)]
    return labels


@dataclass(frozen=True)
class StudySpec:
    model: int = 1
    sample_sizes: tuple = (500, 2000)
    replications: int = 50
    rounds_per_fit: int = 8
    seed: int = 0
    threads: int = 1
    ga_generations: int = 60

    def __post_init__(self):
        if self.model not in BENCHMARK_MODELS:
            raise ValueError("model must be 1 or 2")
        if self.replications < 0 or any(int(t) < 1 for t in self.sample_sizes):
            raise ValueError("replications must be >= 0 and sample sizes positive")


@dataclass(frozen=True)
class StudyResult:
    sample_sizes: tuple
    labels: tuple
    mean_error: np.ndarray  # (n_sizes, n_params)
    std_dev: np.ndarray  # (n_sizes, n_params)
    failures: np.ndarray  # (n_sizes,)
    n_success: np.ndarray  # (n_sizes,)
    errors: list = field(repr=False, default_factory=list)  # per size: (n_success, n_params)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["parameter"]
        for T in self.sample_sizes:
            header += [f"mean_T{T}", f"std_T{T}"]
        w.writerow(header)
        for k, lab in enumerate(self.labels):
            row = [lab]
            for s in range(len(self.sample_sizes)):
                row += [f"{self.mean_error[s, k]:.6f}", f"{self.std_dev[s, k]:.6f}"]
            w.writerow(row)
        w.writerow(["failures"] + [v for f in self.failures for v in (int(f), "")])
        return buf.getvalue()


def simulate_sample(truth: ParameterVector, T: int, seed) -> np.ndarray:
    """p + T rows from regime 1's stationary start after a discarded burn-in."""
    y = simulate(truth, T + BURN_IN, init=0, seed=seed).values
    return y[BURN_IN:]


def _replication(args):
    spec, truth, T, rep, estimator = args
    ss = np.random.SeedSequence([int(spec.seed), int(T), int(rep)])
    data_seed, fit_seed = ss.spawn(2)
    y = simulate_sample(truth, T, data_seed)
    try:
        if estimator is not None:
            est = estimator(y, truth)
        else:
            cfg = EstimationConfig(rounds=spec.rounds_per_fit, ga_generations=spec.ga_generations,
                                   seed=int(fit_seed.generate_state(1)[0]))
            est = fit(y, truth.order, cfg).params
        est = identify(est)
    except Exception:
        return None
    return est.to_flat() - truth.to_flat()


def run_study(spec: StudySpec, estimator: Callable | None = None) -> StudyResult:
    """Simulate, re-estimate and summarise estimation errors per sample size.

    ``estimator(data, truth) -> ParameterVector`` replaces the default fit.
    """
    truth = benchmark_model(spec.model)
    n = truth.order.n_params
    tasks = [(spec, truth, int(T), rep, estimator)
             for T in spec.sample_sizes for rep in range(spec.replications)]
    if spec.threads > 1 and estimator is None and tasks:
        with ProcessPoolExecutor(max_workers=spec.threads) as ex:
            outcomes = list(ex.map(_replication, tasks))
    else:
        outcomes = [_replication(t) for t in tasks]
    means, stds, fails, succ, errs = [], [], [], [], []
    k = 0
    for T in spec.sample_sizes:
        block = outcomes[k:k + spec.replications]
        k += spec.replications
        ok = [e for e in block if e is not None]
        fails.append(len(block) - len(ok))
        succ.append(len(ok))
        arr = np.array(ok).reshape(-1, n)
        errs.append(arr)
        if len(ok) == 0:
            means.append(np.full(n, np.nan))
            stds.append(np.full(n, np.nan))
        else:
            means.append(arr.mean(axis=0))
            stds.append(arr.std(axis=0, ddof=1) if len(ok) > 1 else np.zeros(n))
    return StudyResult(tuple(int(t) for t in spec.sample_sizes), tuple(param_labels(truth.order)),
                       np.array(means).reshape(-1, n), np.array(stds).reshape(-1, n),
                       np.array(fails), np.array(succ), errs)
