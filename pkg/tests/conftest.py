import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from gstvar.params import ParameterVector  # noqa: E402

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def _stable_ar(rng, d, p, radius):
    mats = [rng.normal(0.0, 0.5, (d, d)) for _ in range(p)]
    comp = np.zeros((d * p, d * p))
    for i, a in enumerate(mats):
        comp[:d, i * d:(i + 1) * d] = a
    if p > 1:
        comp[d:, :-d] = np.eye(d * (p - 1))
    rho = np.max(np.abs(np.linalg.eigvals(comp)))
    c = radius / rho
    return [a * c ** (i + 1) for i, a in enumerate(mats)]


def random_params(rng, d, p, M, radius=None, identified=False):
    """A random valid parameter point; every regime has companion radius ``radius``."""
    phis, ars, omegas = [], [], []
    for _ in range(M):
        r = radius if radius is not None else rng.uniform(0.2, 0.9)
        phis.append(rng.normal(0.0, 1.0, d))
        ars.append(_stable_ar(rng, d, p, r))
        L = np.tril(rng.normal(0.0, 0.4, (d, d)))
        L[np.diag_indices(d)] = rng.uniform(0.4, 1.2, d)
        omegas.append(L @ L.T)
    alphas = rng.dirichlet(np.full(M, 3.0))
    alphas = np.clip(alphas, 0.05, None)
    alphas /= alphas.sum()
    if identified:
        alphas = np.sort(alphas)[::-1]
    return ParameterVector.from_arrays(phis, ars, omegas, alphas, identified=identified)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
