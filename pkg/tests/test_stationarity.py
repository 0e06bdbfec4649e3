import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from conftest import random_params
from gstvar.errors import DimensionMismatch, EigenFailure
from gstvar.montecarlo import benchmark_model
from gstvar.params import ParameterVector, RegimeParameters
from gstvar.stationarity import (
    check_necessary,
    check_sufficient,
    companion_matrix,
    jsr_bounds,
    spectral_radius,
)


def _moduli(a):
    return np.sort(np.abs(np.linalg.eigvals(a)))[::-1]


def _random_stable_pair(rng, n, radius):
    out = []
    for _ in range(2):
        a = rng.normal(size=(n, n))
        out.append(a * radius / spectral_radius(a))
    return out


# companion matrix


def test_companion_p1_is_ar_matrix():
    a = np.array([[0.5, -0.3], [0.2, 0.7]])
    r = RegimeParameters(np.zeros(2), (a,), np.eye(2))
    np.testing.assert_array_equal(companion_matrix(r), a)


def test_companion_block_pattern():
    r = RegimeParameters(np.zeros(2), (np.eye(2), np.zeros((2, 2))), np.eye(2))
    expected = np.zeros((4, 4))
    expected[:2, :2] = np.eye(2)
    expected[2:, :2] = np.eye(2)
    np.testing.assert_array_equal(companion_matrix(r), expected)


@given(st.integers(1, 4), st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_companion_shift_rows_are_exact(d, p, seed):
    r = random_params(np.random.default_rng(seed), d, p, 1).regimes[0]
    c = companion_matrix(r)
    lower = c[d:]
    assert set(np.unique(lower)) <= {0.0, 1.0}
    np.testing.assert_array_equal(lower[:, :-d], np.eye(d * (p - 1)))


def test_companion_wrong_p():
    r = RegimeParameters(np.zeros(1), (np.eye(1) * 0.5,), np.eye(1))
    with pytest.raises(DimensionMismatch):
        companion_matrix(r, 2)


# spectral radius


def test_spectral_radius_identity():
    assert spectral_radius(np.eye(3)) == 1.0


def test_spectral_radius_table_matrix():
    a = np.array([[-0.1, -0.2], [0.3, 0.5]])
    assert spectral_radius(a) == pytest.approx(0.37, abs=0.005)
    assert _moduli(a)[1] == pytest.approx(0.03, abs=0.005)


@given(st.integers(0, 2**32 - 1))
def test_spectral_radius_constructed_spectrum(seed):
    rng = np.random.default_rng(seed)
    diag = rng.uniform(-2.0, 2.0, 5)
    s = rng.normal(size=(5, 5)) + 5 * np.eye(5)
    a = s @ np.diag(diag) @ np.linalg.inv(s)
    assert spectral_radius(a) == pytest.approx(np.max(np.abs(diag)), abs=1e-8)


def test_spectral_radius_nonfinite():
    with pytest.raises(EigenFailure):
        spectral_radius(np.array([[np.inf, 0.0], [0.0, 1.0]]))


# necessary condition


def test_necessary_zero_ar():
    p = ParameterVector.from_arrays([np.zeros(2)] * 2, [[np.zeros((2, 2))]] * 2, [np.eye(2)] * 2, [0.6])
    ok, radii = check_necessary(p)
    assert ok
    np.testing.assert_array_equal(radii, [0.0, 0.0])


def test_necessary_unit_root():
    p = ParameterVector.from_arrays([np.zeros(1)], [[np.eye(1)]], [np.eye(1)], [1.0])
    assert not check_necessary(p)[0]


def test_necessary_benchmarks_match_table():
    ok1, r1 = check_necessary(benchmark_model(1))
    ok2, r2 = check_necessary(benchmark_model(2))
    assert ok1 and ok2
    np.testing.assert_allclose(r1, [0.64, 0.37], atol=0.005)
    np.testing.assert_allclose(r2, [0.97, 0.96], atol=0.005)
    mods = np.concatenate([_moduli(companion_matrix(r)) for r in benchmark_model(2).regimes])
    np.testing.assert_allclose(mods, [0.97, 0.97, 0.96, 0.87], atol=0.01)


# joint spectral radius


@given(st.integers(1, 4), st.integers(0, 2**32 - 1), st.floats(0.05, 1.5))
def test_jsr_singleton_is_spectral_radius(n, seed, radius):
    a = np.random.default_rng(seed).normal(size=(n, n))
    a = a * radius / max(spectral_radius(a), 1e-12)
    cert = jsr_bounds([a], tolerance=1e-2)
    rho = spectral_radius(a)
    assert cert.converged
    assert cert.lower == pytest.approx(rho, abs=1e-12)
    assert cert.lower <= rho + 1e-12 <= cert.upper + 1e-12
    assert cert.upper - cert.lower <= 1e-2


def test_jsr_commuting_diagonals():
    mats = [np.diag([0.5, 0.2]), np.diag([0.3, 0.6])]
    cert = jsr_bounds(mats, tolerance=1e-2)
    exact = oracles.exhaustive_jsr_lower(mats, 12)
    assert exact == pytest.approx(0.6, abs=1e-12)
    assert cert.converged
    assert cert.lower - 1e-12 <= 0.6 <= cert.upper + 1e-12


def test_jsr_model1_certified():
    mats = [companion_matrix(r) for r in benchmark_model(1).regimes]
    cert = jsr_bounds(mats, tolerance=1e-2)
    exhaustive = oracles.exhaustive_jsr_lower(mats, 10)
    assert cert.converged and cert.upper < 1.0
    assert cert.lower >= exhaustive - 1e-12
    assert cert.lower <= exhaustive + 1e-2


def test_jsr_model2_lower_bound_exceeds_one():
    # the product A1 A1 A2 has spectral radius above one, so no certificate exists
    mats = [companion_matrix(r) for r in benchmark_model(2).regimes]
    cert = jsr_bounds(mats, tolerance=1e-2)
    exhaustive = oracles.exhaustive_jsr_lower(mats, 10)
    assert exhaustive > 1.0
    assert cert.lower >= exhaustive - 1e-12
    assert not cert.certifies_stationarity
    assert not check_sufficient(benchmark_model(2)).certifies_stationarity


@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_jsr_sandwich_and_tolerance(n, k, seed):
    rng = np.random.default_rng(seed)
    mats = [rng.normal(size=(n, n)) * 0.5 for _ in range(k)]
    cert = jsr_bounds(mats, tolerance=1e-2, max_products=20000)
    assert max(spectral_radius(m) for m in mats) - 1e-10 <= cert.lower <= cert.upper
    if cert.converged:
        assert cert.upper - cert.lower <= cert.tolerance_requested


@given(st.integers(0, 2**32 - 1), st.floats(0.25, 4.0))
def test_jsr_homogeneity(seed, c):
    rng = np.random.default_rng(seed)
    mats = _random_stable_pair(rng, 2, 0.8)
    tol = 1e-2
    base = jsr_bounds(mats, tolerance=tol, max_products=10**5)
    scaled = jsr_bounds([c * m for m in mats], tolerance=tol, max_products=10**5)
    # both intervals contain the true JSR, so their rescaled versions overlap
    assert c * base.lower <= scaled.upper + 1e-10
    assert scaled.lower <= c * base.upper + 1e-10
    if base.converged and scaled.converged:
        assert abs(scaled.lower - c * base.lower) <= max(c, 1.0) * tol + 1e-10
        assert abs(scaled.upper - c * base.upper) <= max(c, 1.0) * tol + 1e-10


@given(st.integers(0, 2**32 - 1))
def test_jsr_lower_bound_monotone_in_set(seed):
    rng = np.random.default_rng(seed)
    mats = _random_stable_pair(rng, 2, 0.8)
    extra = rng.normal(size=(2, 2))
    extra *= rng.uniform(0.3, 0.9) / spectral_radius(extra)
    small = jsr_bounds(mats, tolerance=1e-2, max_products=10**5)
    big = jsr_bounds(mats + [extra], tolerance=1e-2, max_products=10**5)
    # k-th roots of product radii of different lengths round differently
    assert big.lower >= small.lower - 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_jsr_random_pairs_confirmed_by_exhaustive_products(seed):
    rng = np.random.default_rng(1000 + seed)
    mats = _random_stable_pair(rng, 2, rng.uniform(0.5, 0.95))
    cert = jsr_bounds(mats, tolerance=1e-2)
    exhaustive = oracles.exhaustive_jsr_lower(mats, 10)
    assert cert.converged
    assert abs(cert.lower - exhaustive) <= 1e-2
    assert exhaustive <= cert.upper + 1e-12


def test_jsr_budget_exhaustion_is_reported():
    rng = np.random.default_rng(0)
    mats = [rng.normal(size=(4, 4)) for _ in range(3)]
    cert = jsr_bounds(mats, tolerance=1e-6, max_products=50)
    assert not cert.converged
    assert cert.lower <= cert.upper
    assert not cert.certifies_stationarity
