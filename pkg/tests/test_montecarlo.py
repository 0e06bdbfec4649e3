import csv
import io

import numpy as np
import pytest

from gstvar.estimation import identify
from gstvar.montecarlo import (
    BURN_IN,
    StudySpec,
    benchmark_model,
    param_labels,
    run_study,
    simulate_sample,
)
from gstvar.params import ParameterVector, vech


def _truth_estimator(y, truth):
    return truth


def test_model1_truth_values():
    m = benchmark_model(1)
    assert m.alphas[0] == pytest.approx(0.70)
    np.testing.assert_allclose(vech(m.regimes[0].omega), [0.50, 0.20, 0.30])
    np.testing.assert_allclose(vech(m.regimes[1].omega), [0.80, -0.20, 0.50])
    np.testing.assert_allclose(m.regimes[0].ar_mats[0], [[0.5, -0.3], [0.2, 0.7]])
    np.testing.assert_allclose(m.regimes[1].phi0, [1.5, 2.0])


def test_model2_shares_covariances():
    a, b = benchmark_model(1), benchmark_model(2)
    for ra, rb in zip(a.regimes, b.regimes):
        np.testing.assert_array_equal(ra.omega, rb.omega)
    np.testing.assert_allclose(b.regimes[1].ar_mats[0], [[-0.99, -0.2], [0.3, 0.9]])


def test_labels_follow_flat_layout():
    labels = param_labels(benchmark_model(1).order)
    assert len(labels) == 19
    theta = benchmark_model(1).to_flat()
    assert theta[labels.index("A1_1_21")] == 0.2
    assert theta[labels.index("A1_1_12")] == -0.3
    assert theta[labels.index("Omega2_21")] == -0.2
    assert labels[-1] == "alpha1"


def test_spec_validation():
    with pytest.raises(ValueError):
        StudySpec(model=3)
    with pytest.raises(ValueError):
        StudySpec(sample_sizes=(0,))
    with pytest.raises(ValueError):
        StudySpec(replications=-1)


def test_simulated_sample_length():
    y = simulate_sample(benchmark_model(1), 300, np.random.SeedSequence(1))
    assert y.shape == (301, 2)
    assert BURN_IN == 200


def test_forced_truth_gives_zero_errors():
    res = run_study(StudySpec(sample_sizes=(50, 80), replications=3), _truth_estimator)
    np.testing.assert_array_equal(res.mean_error, 0.0)
    np.testing.assert_array_equal(res.std_dev, 0.0)
    np.testing.assert_array_equal(res.failures, 0)
    assert res.mean_error.shape == (2, 19)


def test_zero_replications_yield_empty_cells():
    res = run_study(StudySpec(sample_sizes=(50,), replications=0), _truth_estimator)
    assert res.n_success.tolist() == [0]
    assert np.all(np.isnan(res.mean_error))


def test_failures_are_counted_not_raised():
    calls = []

    def flaky(y, truth):
        calls.append(1)
        if len(calls) % 2:
            raise RuntimeError("boom")
        return truth

    res = run_study(StudySpec(sample_sizes=(40,), replications=4), flaky)
    assert res.failures.tolist() == [2]
    assert res.n_success.tolist() == [2]


def test_relabelled_estimate_is_aligned():
    # an estimator returning the regimes in swapped order must still score zero
    def swapped(y, truth):
        r = truth.regimes
        return ParameterVector(truth.order, (r[1], r[0]), truth.alphas[::-1])

    res = run_study(StudySpec(sample_sizes=(40,), replications=2), swapped)
    np.testing.assert_allclose(res.mean_error, 0.0, atol=1e-15)
    assert identify(swapped(None, benchmark_model(1))).to_flat().tolist() == \
        benchmark_model(1).to_flat().tolist()


def test_csv_layout():
    res = run_study(StudySpec(sample_sizes=(50, 80), replications=2), _truth_estimator)
    rows = list(csv.reader(io.StringIO(res.to_csv())))
    assert rows[0] == ["parameter", "mean_T50", "std_T50", "mean_T80", "std_T80"]
    assert len(rows) == 1 + 19 + 1
    assert rows[1][0] == "phi1_1"
    assert rows[-1][0] == "failures"


def test_study_is_deterministic():
    def noisy(y, truth):
        # depends on the simulated data only
        theta = truth.to_flat().copy()
        theta[0] += y[:, 0].mean() * 1e-3
        return ParameterVector.from_flat(theta, truth.order)

    spec = StudySpec(sample_sizes=(60,), replications=3, seed=9)
    a, b = run_study(spec, noisy), run_study(spec, noisy)
    assert a.to_csv() == b.to_csv()
    c = run_study(StudySpec(sample_sizes=(60,), replications=3, seed=10), noisy)
    assert c.to_csv() != a.to_csv()


@pytest.mark.slow
def test_real_fits_deterministic_across_threads():
    spec = dict(sample_sizes=(300,), replications=2, rounds_per_fit=2, ga_generations=10, seed=4)
    a = run_study(StudySpec(threads=1, **spec))
    b = run_study(StudySpec(threads=2, **spec))
    assert a.to_csv() == b.to_csv()
    np.testing.assert_array_equal(a.errors[0], b.errors[0])
