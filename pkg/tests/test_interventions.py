import numpy as np
import pytest
from scipy import stats

from knockoff_invariance.core import DataError, MultivariateTimeSeries
from knockoff_invariance.interventions import InterventionKind, generate
from knockoff_invariance.knockoff import fit_gaussian


def _standard_series(r=10000, rho=0.6, seed=0):
    rng = np.random.default_rng(seed)
    cov = (1 - rho) * np.eye(3) + rho * np.ones((3, 3))
    return MultivariateTimeSeries(rng.multivariate_normal(np.zeros(3), cov, size=r))


def test_mean_kind_without_noise():
    series = MultivariateTimeSeries(np.array([[1.0], [2.0], [3.0]]))
    out = generate(InterventionKind("mean", noise_scale=0.0), 0, series, length=3)
    np.testing.assert_array_equal(out, [2.0, 2.0, 2.0])


def test_uniform_kind_range_and_law():
    rng = np.random.default_rng(1)
    z = np.concatenate([[0.0, 1.0], rng.uniform(size=498)])
    series = MultivariateTimeSeries(z[:, None])
    out = generate("uniform", 0, series, seed=2, length=10000)
    assert out.min() >= 0.0 and out.max() <= 1.0
    assert stats.kstest(out, "uniform").pvalue > 0.01


def test_uniform_constant_falls_back_with_warning():
    series = MultivariateTimeSeries(np.full((10, 1), 3.0))
    with pytest.warns(UserWarning, match="constant"):
        out = generate("uniform", 0, series, length=5)
    np.testing.assert_array_equal(out, 3.0)


def test_ood_kind_moments_and_independence():
    series = _standard_series(seed=3)
    z = series.column(0)
    z = (z - z.mean()) / z.std(ddof=1)
    series = MultivariateTimeSeries(np.column_stack([z, series.values[:, 1:]]))
    out = generate("ood", 0, series, seed=4)
    assert abs(out.mean() - 3.0) < 0.1
    assert abs(out.std(ddof=1) - 2.0) < 0.1
    assert abs(np.corrcoef(out, z)[0, 1]) < 0.05


def test_ood_independent_of_all_columns():
    series = _standard_series(r=2000, seed=5)
    bound = 4 / np.sqrt(series.length)
    ok = 0
    for seed in range(40):
        out = generate("ood", 1, series, seed=seed)
        ok += all(abs(np.corrcoef(out, series.column(k))[0, 1]) < bound for k in range(3))
    assert ok / 40 >= 0.95


def test_knockoff_kind_is_row_aligned_column():
    series = _standard_series(r=500, seed=6)
    model = fit_gaussian(series)
    out = generate("knockoff", 2, series, model, seed=7, rows=slice(100, 300))
    assert out.shape == (200,)
    from knockoff_invariance.knockoff import sample_knockoffs
    expected = sample_knockoffs(model, series.values[100:300], seed=7)[:, 2]
    np.testing.assert_array_equal(out, expected)


def test_knockoff_kind_requires_model():
    with pytest.raises(DataError, match="knockoff model"):
        generate("knockoff", 0, _standard_series(r=50))


def test_marginal_variance():
    series = _standard_series(r=10000, seed=8)
    var = series.column(0).var(ddof=1)
    model = fit_gaussian(series)
    draws = {tag: generate(tag, 0, series, model, seed=9) for tag in ("knockoff", "mean", "uniform", "ood")}
    rel = {tag: abs(d.var(ddof=1) / var - 1) for tag, d in draws.items()}
    assert rel["knockoff"] < 0.1
    assert rel["uniform"] > 0.1 and rel["ood"] > 0.1
    # the mean kind as defined (mean + N(0, Sigma_ii)) keeps the variance too
    assert rel["mean"] < 0.1


def test_knockoff_correlates_with_other_columns_like_data():
    series = _standard_series(r=10000, seed=10)
    model = fit_gaussian(series)
    ko = generate("knockoff", 0, series, model, seed=11)
    mean = generate("mean", 0, series, seed=11)
    target = np.corrcoef(series.column(0), series.column(1))[0, 1]
    assert abs(np.corrcoef(ko, series.column(1))[0, 1] - target) < 0.05
    assert abs(np.corrcoef(mean, series.column(1))[0, 1]) < 0.05


def test_deterministic():
    series = _standard_series(r=300, seed=12)
    model = fit_gaussian(series)
    for tag in ("knockoff", "mean", "uniform", "ood"):
        np.testing.assert_array_equal(generate(tag, 1, series, model, seed=13),
                                      generate(tag, 1, series, model, seed=13))


def test_kind_validation():
    with pytest.raises(DataError, match="unknown intervention"):
        InterventionKind("zero")
    with pytest.raises(DataError, match="finite"):
        InterventionKind("ood", ood_shift=float("inf"))
