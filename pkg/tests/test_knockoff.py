import doctest

import numpy as np
import pytest

import knockoff_invariance.knockoff as ko
from knockoff_invariance.core import MultivariateTimeSeries
from knockoff_invariance.knockoff import (
    KnockoffError,
    compute_equicorrelated_s,
    diagnose_exchangeability,
    fit_gaussian,
    fit_gmm,
    sample_gmm_knockoffs,
    sample_knockoffs,
)

EPS = 1e-6


def equicorr(n, rho):
    return (1 - rho) * np.eye(n) + rho * np.ones((n, n))


def test_doctests():
    result = doctest.testmod(ko, extraglobs={"np": np})
    assert result.failed == 0


@pytest.mark.parametrize("rho", [0.3, 0.5, 0.8, -0.4])
def test_two_by_two_closed_form(rho):
    # eigenvalues of [[1, rho], [rho, 1]] are 1 +/- rho
    expected = min(1.0, 2 * (1 - abs(rho))) * (1 - EPS)
    s = compute_equicorrelated_s(equicorr(2, rho))
    np.testing.assert_allclose(np.diag(s), [expected, expected], rtol=0, atol=1e-15)
    assert np.count_nonzero(s - np.diag(np.diag(s))) == 0


def test_equicorrelated_five_by_five():
    # lambda_min of the rho = 0.6 equicorrelation matrix is 1 - rho = 0.4
    s = compute_equicorrelated_s(equicorr(5, 0.6))
    np.testing.assert_allclose(np.diag(s), 0.8 * (1 - EPS), atol=1e-14)


def test_rescaled_to_original_units():
    sd = np.array([2.0, 0.5])
    cov = equicorr(2, 0.5) * np.outer(sd, sd)
    s = compute_equicorrelated_s(cov)
    np.testing.assert_allclose(np.diag(s), sd ** 2 * (1 - EPS), rtol=1e-12)


def test_single_variable():
    s = compute_equicorrelated_s(np.array([[3.0]]))
    assert s.shape == (1, 1)
    assert abs(s[0, 0] - 3.0 * (1 - EPS)) < 1e-14


def test_invalid_covariance():
    with pytest.raises(KnockoffError, match="symmetric"):
        compute_equicorrelated_s(np.array([[1.0, 0.2], [0.3, 1.0]]))
    with pytest.raises(KnockoffError, match="positive definite"):
        compute_equicorrelated_s(np.array([[1.0, 1.0], [1.0, 1.0]]))


def _gaussian_rows(n_rows, cov, seed=0, mean=None):
    rng = np.random.default_rng(seed)
    mean = np.zeros(len(cov)) if mean is None else mean
    return rng.multivariate_normal(mean, cov, size=n_rows)


def test_second_order_moments():
    sigma = equicorr(4, 0.6)
    x = _gaussian_rows(20000, sigma, seed=1)
    model = fit_gaussian(x)
    xk = sample_knockoffs(model, x, seed=2)
    report = diagnose_exchangeability(x, xk, model)
    assert not report.flagged
    # Cov(Z_i, Zk_i) = 1 - s with s = min(1, 2 * 0.4) = 0.8
    np.testing.assert_allclose(report.self_cov, 0.2, atol=0.05)


def test_knockoffs_differ_from_originals():
    x = _gaussian_rows(2000, equicorr(3, 0.2), seed=3)
    xk = sample_knockoffs(fit_gaussian(x), x, seed=4)
    assert np.mean(np.abs(x - xk)) > 0.5


def test_returns_input_type_and_is_deterministic():
    x = _gaussian_rows(300, equicorr(3, 0.3), seed=5)
    series = MultivariateTimeSeries(x, ("a", "b", "c"))
    model = fit_gaussian(series)
    a = sample_knockoffs(model, series, seed=9)
    b = sample_knockoffs(model, series, seed=9)
    assert isinstance(a, MultivariateTimeSeries) and a.names == ("a", "b", "c")
    np.testing.assert_array_equal(a.values, b.values)
    assert isinstance(sample_knockoffs(model, x, seed=9), np.ndarray)


def test_identical_copy_is_flagged():
    x = _gaussian_rows(5000, equicorr(3, 0.5), seed=6)
    model = fit_gaussian(x)
    report = diagnose_exchangeability(x, x.copy(), model)
    assert report.flagged
    assert "flagged" in report.table()


def test_singular_covariance_is_regularized():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(500, 1))
    x = np.hstack([a, a, rng.normal(size=(500, 1))])
    model = fit_gaussian(x)
    xk = sample_knockoffs(model, x, seed=1)
    assert np.all(np.isfinite(xk))


def test_too_few_rows():
    with pytest.raises(KnockoffError, match="more rows"):
        fit_gaussian(np.ones((3, 3)) + np.eye(3))


def test_dimension_mismatch():
    model = fit_gaussian(_gaussian_rows(100, np.eye(2)))
    with pytest.raises(KnockoffError, match="dimension"):
        sample_knockoffs(model, np.zeros((5, 3)))


class TestGmm:
    def _two_clusters(self, seed=0):
        rng = np.random.default_rng(seed)
        a = rng.multivariate_normal([-4, -4], equicorr(2, 0.5), size=700)
        b = rng.multivariate_normal([4, 4], equicorr(2, -0.3), size=300)
        return np.vstack([a, b])

    def test_em_recovers_weights_and_means(self):
        model = fit_gmm(self._two_clusters(), 2, seed=0)
        order = np.argsort([c.mean[0] for c in model.components])
        w = model.weights[order]
        np.testing.assert_allclose(w, [0.7, 0.3], atol=0.02)
        np.testing.assert_allclose(model.components[order[0]].mean, [-4, -4], atol=0.15)
        assert model.n_iter >= 1

    def test_mixture_knockoffs_stay_in_their_cluster(self):
        x = self._two_clusters(1)
        model = fit_gmm(x, 2, seed=0)
        xk = sample_gmm_knockoffs(model, x, seed=3)
        same_side = np.sign(xk[:, 0]) == np.sign(x[:, 0])
        assert same_side.mean() > 0.98
        # marginal moments preserved
        np.testing.assert_allclose(xk.mean(axis=0), x.mean(axis=0), atol=0.25)
        np.testing.assert_allclose(xk.std(axis=0), x.std(axis=0), rtol=0.05)

    def test_single_component_matches_gaussian_fit(self):
        x = _gaussian_rows(500, equicorr(3, 0.4), seed=8)
        g = fit_gaussian(x)
        m = fit_gmm(x, 1, seed=0)
        np.testing.assert_allclose(m.cov, g.cov, atol=1e-10)

    def test_errors(self):
        with pytest.raises(KnockoffError, match=">= 1"):
            fit_gmm(np.zeros((10, 2)), 0)
        with pytest.raises(KnockoffError, match="r > K"):
            fit_gmm(np.random.default_rng(0).normal(size=(5, 2)), 3)
        with pytest.raises(KnockoffError, match="mixture components"):
            sample_gmm_knockoffs(fit_gaussian(_gaussian_rows(50, np.eye(2))), np.zeros((3, 2)))


def test_identity_covariance_gives_independent_knockoffs():
    x = _gaussian_rows(50000, np.eye(3), seed=10)
    model = fit_gaussian(x)
    np.testing.assert_allclose(model.cov, np.eye(3), atol=0.05)
    np.testing.assert_allclose(model.gaussian.s_matrix, np.eye(3), atol=0.05)
    xk = sample_knockoffs(model, x, seed=11)
    for i in range(3):
        assert abs(np.corrcoef(x[:, i], xk[:, i])[0, 1]) < 0.03


def test_exact_gaussian_report_within_tolerance():
    x = _gaussian_rows(50000, equicorr(5, 0.6), seed=12)
    model = fit_gaussian(x)
    report = diagnose_exchangeability(x, sample_knockoffs(model, x, seed=13), model)
    assert max(report.knockoff_cov_deviation, report.cross_cov_deviation,
               report.self_cov_deviation) < 0.05


def test_single_column_series():
    rng = np.random.default_rng(14)
    x = 2.0 * rng.normal(size=(5000, 1))
    model = fit_gaussian(x)
    var = model.cov[0, 0]
    assert abs(model.s[0] - var * (1 - EPS)) < 1e-12
    # V = 2S - S^2 / sigma^2 stays positive
    assert model.v[0, 0] > 0
    assert np.all(np.isfinite(sample_knockoffs(model, x, seed=1)))


def test_r_equal_n_rejected():
    with pytest.raises(KnockoffError):
        fit_gaussian(np.random.default_rng(0).normal(size=(3, 3)))


def test_row_permutation_is_flagged():
    x = _gaussian_rows(20000, equicorr(3, 0.6), seed=15)
    model = fit_gaussian(x)
    perm = x[np.random.default_rng(16).permutation(len(x))]
    report = diagnose_exchangeability(x, perm, model)
    # Cov(Z_i, Zk_i) drops to 0 while the target is 1 - s = 0.2
    assert report.flagged
    assert report.self_cov_deviation > 0.15


def test_copy_self_cov_deviation_equals_s():
    x = _gaussian_rows(20000, equicorr(3, 0.6), seed=17)
    model = fit_gaussian(x)
    report = diagnose_exchangeability(x, x.copy(), model)
    assert abs(report.self_cov_deviation - 0.8) < 0.05


class TestGmmExamples:
    def test_k1_parameters_match_within_1e4(self):
        x = _gaussian_rows(2000, equicorr(3, 0.4), seed=18)
        g, m = fit_gaussian(x), fit_gmm(x, 1, seed=1)
        np.testing.assert_allclose(m.mean, g.mean, atol=1e-4)
        np.testing.assert_allclose(m.components[0].cov, g.cov, atol=1e-4)

    def test_blob_means_within_0_1(self):
        rng = np.random.default_rng(19)
        centers = np.array([[-5.0, 0.0], [5.0, 2.0]])
        x = np.vstack([rng.normal(size=(2000, 2)) * 0.5 + c for c in centers])
        model = fit_gmm(x, 2, seed=3)
        got = np.array([c.mean for c in model.components])
        d_same = np.abs(got - centers).max()
        d_swap = np.abs(got[::-1] - centers).max()
        assert min(d_same, d_swap) < 0.1

    def test_k1_mixture_sampler_matches_gaussian_sampler(self):
        from scipy.stats import ks_2samp
        x = _gaussian_rows(10000, equicorr(3, 0.5), seed=20)
        m = fit_gmm(x, 1, seed=0)
        a = sample_gmm_knockoffs(m, x, seed=1)
        b = sample_knockoffs(fit_gaussian(x), x, seed=2)
        for i in range(3):
            assert ks_2samp(a[:, i], b[:, i]).pvalue > 0.01

    def test_blob_rows_stay_within_three_sd(self):
        rng = np.random.default_rng(21)
        centers = np.array([[-6.0, -6.0], [6.0, 6.0]])
        x = np.vstack([rng.normal(size=(1500, 2)) + c for c in centers])
        labels = np.repeat([0, 1], 1500)
        model = fit_gmm(x, 2, seed=0)
        xk = sample_gmm_knockoffs(model, x, seed=5)
        near = np.all(np.abs(xk - centers[labels]) < 3.0, axis=1)
        assert near.mean() >= 0.99

    def test_same_seed_same_output(self):
        x = _gaussian_rows(400, equicorr(2, 0.3), seed=22)
        m = fit_gmm(x, 2, seed=0)
        np.testing.assert_array_equal(sample_gmm_knockoffs(m, x, seed=4), sample_gmm_knockoffs(m, x, seed=4))
