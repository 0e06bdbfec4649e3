import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from conftest import random_params
from gstvar.errors import EmptyHistorySet, ScaleDegenerate
from gstvar.model import log_likelihood, simulate
from gstvar.montecarlo import benchmark_model
from gstvar.params import ParameterVector
from gstvar.structural import (
    History,
    data_histories,
    gfevd,
    girf,
    girf_collection,
    impact_matrix,
    recover_shocks,
    regime_histories,
    stationary_histories,
)


def _linear_model(rng, d=2, p=1, radius=0.7):
    return random_params(rng, d, p, 1, radius=radius)


# impact matrix


def test_impact_identity():
    np.testing.assert_array_equal(impact_matrix(np.eye(3)), np.eye(3))


def test_impact_hand_cholesky():
    np.testing.assert_allclose(impact_matrix([[4.0, 2.0], [2.0, 2.0]]), [[2.0, 0.0], [1.0, 1.0]], atol=1e-15)


@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_impact_reconstruction(d, seed):
    rng = np.random.default_rng(seed)
    q = rng.normal(size=(d, d))
    s = q @ q.T + 0.1 * np.eye(d)
    B = impact_matrix(s)
    assert np.max(np.abs(B @ B.T - s)) < 1e-10
    np.testing.assert_array_equal(B, np.tril(B))


# shock recovery


def test_recovered_shocks_equal_simulation_draws():
    params = benchmark_model(1)
    y, eps = simulate(params, 500, init=0, seed=17, return_innovations=True)
    rec = recover_shocks(params, y)
    assert np.max(np.abs(rec.shocks - eps)) < 1e-8


def test_recovered_shocks_linear_case(rng):
    params = _linear_model(rng, d=3, p=2)
    y = simulate(params, 200, init=0, seed=2).values
    r = params.regimes[0]
    phi, ar = r.phi0, r.ar_stack
    B = np.linalg.cholesky(r.omega)
    expected = []
    for t in range(2, y.shape[0]):
        u = y[t] - phi - ar @ np.concatenate([y[t - 1], y[t - 2]])
        expected.append(np.linalg.inv(B) @ u)
    np.testing.assert_allclose(recover_shocks(params, y).shocks, expected, atol=1e-10)


@pytest.mark.slow
def test_recovered_shock_covariance_large_sample():
    params = benchmark_model(1)
    y = simulate(params, 10**5, init=0, seed=4).values
    shocks = recover_shocks(params, y).shocks
    np.testing.assert_allclose(np.cov(shocks.T), np.eye(2), atol=0.02)


# GIRF


def test_girf_identical_branches_are_zero():
    params = benchmark_model(1)
    res = girf(params, 0, "baseline", np.array([[0.1, 1.0]]), 10, 200, seed=1)
    np.testing.assert_array_equal(res.variable_paths, 0.0)
    np.testing.assert_array_equal(res.weight_paths, 0.0)


@pytest.mark.parametrize("p", [1, 2])
def test_girf_linear_matches_analytic_irf(p):
    rng = np.random.default_rng(30 + p)
    params = _linear_model(rng, d=2, p=p)
    r = params.regimes[0]
    B = np.linalg.cholesky(r.omega)
    H, delta = 12, 1.3
    irf = oracles.linear_irf(list(r.ar_mats), B, H)
    for j in range(2):
        res = girf(params, j, delta, rng.normal(size=(p, 2)), H, 10**4, seed=j)
        expected = irf[:, :, j] * delta
        tol = 3 * res.variable_se + 1e-12
        assert np.all(np.abs(res.variable_paths - expected) <= tol)


@pytest.mark.xfail(strict=True, reason="the baseline branch keeps its own random impact draw, "
                   "so a linear model's per-repetition difference varies with that draw")
def test_girf_linear_has_zero_repetition_variance(rng):
    params = _linear_model(rng, d=3, p=2)
    res = girf(params, 1, 0.7, rng.normal(size=(2, 3)), 8, 500, seed=3)
    assert np.max(res.variable_rep_std) < 1e-12


def test_girf_linear_repetition_spread_is_the_impact_draw(rng):
    # each repetition differs by Psi_h B e_j (delta - e_0j), so the spread is
    # proportional to the analytic response with one common factor
    params = _linear_model(rng, d=3, p=2)
    r = params.regimes[0]
    irf = oracles.linear_irf(list(r.ar_mats), np.linalg.cholesky(r.omega), 8)[:, :, 1]
    res = girf(params, 1, 0.7, rng.normal(size=(2, 3)), 8, 500, seed=3)
    big = np.abs(irf) > 1e-6
    factor = res.variable_rep_std[big] / np.abs(irf[big])
    np.testing.assert_allclose(factor, factor[0], rtol=1e-9)
    assert factor[0] == pytest.approx(1.0, abs=0.15)


def test_girf_linear_common_random_numbers(rng):
    # with shared draws, the difference of two shock sizes is exactly analytic
    params = _linear_model(rng, d=2, p=2)
    r = params.regimes[0]
    irf = oracles.linear_irf(list(r.ar_mats), np.linalg.cholesky(r.omega), 8)
    h = rng.normal(size=(2, 2))
    a = girf(params, 0, 0.4, h, 8, 300, seed=8)
    b = girf(params, 0, 1.9, h, 8, 300, seed=8)
    np.testing.assert_allclose(b.variable_paths - a.variable_paths, 1.5 * irf[:, :, 0], atol=1e-12)


def test_girf_linear_homogeneity(rng):
    params = _linear_model(rng)
    h = rng.normal(size=(1, 2))
    a = girf(params, 0, 0.5, h, 6, 2000, seed=8)
    b = girf(params, 0, 1.0, h, 6, 2000, seed=9)
    tol = 3 * np.hypot(b.variable_se, 2 * a.variable_se) + 1e-12
    assert np.all(np.abs(b.variable_paths - 2 * a.variable_paths) <= tol)


def test_girf_weight_rows_sum_to_zero(rng):
    params = random_params(rng, 2, 2, 3)
    res = girf(params, 1, 1.5, rng.normal(size=(2, 2)), 10, 400, seed=2)
    assert np.max(np.abs(res.weight_paths.sum(axis=1))) < 1e-10
    np.testing.assert_array_equal(res.weight_paths[0], 0.0)


def test_girf_deterministic():
    params = benchmark_model(2)
    h = np.array([[0.0, 1.0]])
    a = girf(params, 0, 1.0, h, 10, 300, seed=np.random.SeedSequence([1, 2]))
    b = girf(params, 0, 1.0, h, 10, 300, seed=np.random.SeedSequence([1, 2]))
    np.testing.assert_array_equal(a.variable_paths, b.variable_paths)
    np.testing.assert_array_equal(a.weight_paths, b.weight_paths)


@pytest.mark.slow
def test_girf_random_shock_averages_to_zero():
    params = benchmark_model(1)
    res = girf(params, 0, "random", np.array([[0.0, 2.0]]), 6, 10**5, seed=5)
    assert np.all(np.abs(res.variable_paths) <= 4 * res.variable_se + 1e-12)


# history selection


@pytest.fixture(scope="module")
def two_regime_sample():
    params = benchmark_model(1)
    return params, simulate(params, 400, init=0, seed=12).values


def test_threshold_zero_selects_everything(two_regime_sample):
    params, y = two_regime_sample
    hs = regime_histories(params, y, 0, threshold=0.0)
    assert len(hs) == y.shape[0] - 1
    all_h = data_histories(params, y)
    for a, b in zip(hs, all_h):
        assert a.origin_index == b.origin_index
        np.testing.assert_array_equal(a.rows, b.rows)


def test_single_regime_histories(rng):
    params = _linear_model(rng)
    y = simulate(params, 50, init=0, seed=1).values
    assert len(regime_histories(params, y, 0)) == 50
    with pytest.raises(EmptyHistorySet):
        regime_histories(params, y, 1)


def test_regime_counts_match_direct_scan(two_regime_sample):
    params, y = two_regime_sample
    _, tr = log_likelihood(params, y, return_trace=True)
    counts = []
    for m in range(2):
        hs = regime_histories(params, y, m, 0.75)
        assert len(hs) == int(np.sum(tr.weights[:, m] > 0.75))
        assert all(h.weight_at_origin[m] > 0.75 for h in hs)
        counts.append(len(hs))
    assert sum(counts) <= y.shape[0] - 1
    assert min(counts) > 0


def test_history_rows_most_recent_first(two_regime_sample):
    params, y = two_regime_sample
    h = data_histories(params, y)[10]
    np.testing.assert_array_equal(h.rows[0], y[h.origin_index - 1])


def test_stationary_histories_shape():
    params = benchmark_model(1)
    hs = stationary_histories(params, 1, 25, seed=3)
    assert len(hs) == 25 and hs[0].rows.shape == (1, 2)


# collections


def test_scale_target_equal_to_impact_gives_unit_factor(two_regime_sample):
    params, y = two_regime_sample
    hs = data_histories(params, y)[:3]
    raw = girf_collection(params, hs, 0, 5, 200, seed=4, mode=1.0)
    target = raw.results[0].variable_paths[0, 0]
    scaled = girf_collection(params, hs[:1], 0, 5, 200, seed=4, mode=1.0, scale=(0, target))
    assert scaled.results[0].scale_factor == pytest.approx(1.0, abs=1e-12)


def test_linear_collection_is_history_independent(rng):
    params = _linear_model(rng)
    y = simulate(params, 30, init=0, seed=6).values
    coll = girf_collection(params, data_histories(params, y), 0, 8, 100, seed=1, mode=1.0, scale=(0, 1.0))
    paths = np.array([r.variable_paths for r in coll.results])
    assert np.max(np.abs(paths - paths[0])) < 1e-10


def test_linear_sign_flip_after_scaling(rng):
    params = _linear_model(rng)
    y = simulate(params, 10, init=0, seed=6).values
    hs = data_histories(params, y)
    pos = girf_collection(params, hs, 1, 6, 50, seed=1, mode=1.0, scale=(1, 1.0))
    neg = girf_collection(params, hs, 1, 6, 50, seed=1, mode=-1.0, scale=(1, 1.0))
    for a, b in zip(pos.results, neg.results):
        np.testing.assert_allclose(a.variable_paths, b.variable_paths, atol=1e-12)
        assert a.scale_factor * b.scale_factor < 0


def test_zero_scale_target_rejected(two_regime_sample):
    params, y = two_regime_sample
    with pytest.raises(ScaleDegenerate):
        girf_collection(params, data_histories(params, y)[:2], 0, 3, 10, scale=(0, 0.0))


def test_degenerate_impact_excluded():
    # shock 2 does not move variable 1 on impact under the recursive ordering
    params = benchmark_model(1)
    hs = [History(np.array([[0.0, 1.0]]), origin_index=5)]
    coll = girf_collection(params, hs, 1, 3, 50, seed=0, mode=1.0, scale=(0, 1.0))
    assert coll.results == [] and coll.excluded == [5]


# GFEVD


def test_gfevd_univariate_is_one(rng):
    params = random_params(rng, 1, 2, 2)
    y = simulate(params, 40, init=0, seed=3).values
    res = gfevd(params, data_histories(params, y)[:5], 6, 50, seed=2)
    np.testing.assert_allclose(res.contributions[0], 1.0, atol=1e-12)


def test_gfevd_decoupled_linear_model():
    params = ParameterVector.from_arrays([np.zeros(2)], [[np.zeros((2, 2))]], [np.diag([1.0, 2.0])], [1.0])
    res = gfevd(params, [History(np.zeros((1, 2)))], 5, 20, seed=0, delta=1.0)
    np.testing.assert_allclose(res.contributions[0, :, 0], 1.0, atol=1e-12)
    np.testing.assert_allclose(res.contributions[0, :, 1], 0.0, atol=1e-12)
    np.testing.assert_allclose(res.contributions[1, :, 1], 1.0, atol=1e-12)
    np.testing.assert_allclose(res.contributions[1, :, 0], 0.0, atol=1e-12)


def _fevd_band(irf, R1, n_sigma=3.0):
    """Worst-case deviation of classical shares when each shock's mean impact draw is off by n_sigma SE.

    In a linear model the Monte Carlo GIRF of shock j is the analytic response
    times (1 - mean of the baseline's impact draws), so only d scalars are random.
    """
    d = irf.shape[2]
    base = oracles.classical_fevd(irf)
    s = n_sigma / np.sqrt(R1)
    band = np.zeros_like(base)
    for j in range(d):
        for sign in (-1.0, 1.0):
            c = np.full(d, 1.0 - sign * s)
            c[j] = 1.0 + sign * s
            band = np.maximum(band, np.abs(oracles.classical_fevd(irf * c) - base))
    return base, band


def test_gfevd_linear_matches_classical(rng):
    params = _linear_model(rng, d=3, p=2)
    r = params.regimes[0]
    H, R1 = 10, 10**4
    irf = oracles.linear_irf(list(r.ar_mats), np.linalg.cholesky(r.omega), H)
    res = gfevd(params, [History(rng.normal(size=(2, 3)))], H, R1, seed=3, delta=1.0)
    expected, band = _fevd_band(irf, R1)
    assert np.all(np.abs(res.contributions[:3] - expected) <= band + 1e-12)


def test_gfevd_rows_sum_to_one(two_regime_sample):
    params, y = two_regime_sample
    hs = regime_histories(params, y, 1, 0.75)[:4]
    res = gfevd(params, hs, 8, 100, seed=1)
    sums = res.contributions.sum(axis=2)
    assert np.max(np.abs(sums[:2] - 1.0)) < 1e-10
    assert np.all(np.isnan(sums[2:, 0]))
    assert np.max(np.abs(sums[2:, 1:] - 1.0)) < 1e-10
