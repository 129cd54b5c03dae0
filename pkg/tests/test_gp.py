import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpfbst import gp
from gpfbst.exceptions import DimensionMismatch


def test_kernel_diagonal_is_amplitude():
    k = gp.Kernel("exponential")
    np.testing.assert_allclose(gp.kernel_matrix(k, [0.0], [0.0]), [[1.0]])
    k2 = gp.Kernel("squared-exponential", 0.3, 2.5)
    x = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(np.diag(k2(x)), 2.5)


def test_kernel_exponential_droplet_form():
    # exp(-|t1 - t2| / 2) at distance 2
    k = gp.kernel_matrix(gp.Kernel("exponential"), [0.0, 2.0], [0.0, 2.0])
    assert k[0, 1] == pytest.approx(math.exp(-1.0), rel=1e-14)
    assert k[0, 1] == pytest.approx(0.3679, abs=1e-4)


def test_kernel_squared_exponential():
    k = gp.kernel_matrix(gp.Kernel("squared-exponential", 1.0), [0.0, 1.0], [0.0, 1.0])
    assert k[0, 1] == pytest.approx(math.exp(-0.5), rel=1e-14)


@pytest.mark.parametrize("variant", gp.KERNEL_VARIANTS)
def test_kernel_psd(variant, rng):
    x = rng.uniform(0, 5, (30, 2))
    k = gp.Kernel(variant, 0.7)(x)
    np.testing.assert_allclose(k, k.T)
    assert np.linalg.eigvalsh(k).min() > -1e-10


def test_kernel_rejects_bad_params():
    with pytest.raises(ValueError):
        gp.Kernel("matern")
    with pytest.raises(ValueError):
        gp.Kernel(length_scale=0.0)


def test_posterior_single_observation_hand_computation():
    prior = gp.GpPrior(6.0, gp.Kernel("exponential"), 0.01)
    post = gp.posterior(prior, [0.0], [7.0], [0.0])
    assert post.mean[0] == pytest.approx(6.0 + (7.0 - 6.0) / 1.01, rel=1e-14)
    assert post.mean[0] == pytest.approx(6.9901, abs=1e-4)
    assert post.cov[0, 0] == pytest.approx(1.0 - 1.0 / 1.01, rel=1e-12)


def test_posterior_interpolation_limit():
    prior = gp.GpPrior(0.0, gp.Kernel("exponential"), 1e-12)
    x = np.array([0.0, 0.7, 1.9, 3.0])
    y = np.array([1.0, -2.0, 0.5, 4.0])
    post = gp.posterior(prior, x, y, x)
    np.testing.assert_allclose(post.mean, y, atol=1e-4)


def test_posterior_scalar_bayes_update(rng):
    """Grid of one point matches the univariate conjugate formula."""
    x = rng.uniform(0, 4, 6)
    y = rng.normal(size=6)
    prior = gp.GpPrior(0.5, gp.Kernel("squared-exponential", 1.3, 2.0), 0.2)
    g = np.array([1.7])
    post = gp.posterior(prior, x, y, g)
    kxx = prior.kernel(x) + 0.2 * np.eye(6)
    kxg = prior.kernel(x, g)[:, 0]
    mean = 0.5 + kxg @ np.linalg.solve(kxx, y - 0.5)
    var = 2.0 - kxg @ np.linalg.solve(kxx, kxg)
    assert post.mean[0] == pytest.approx(mean, rel=1e-12)
    assert post.cov[0, 0] == pytest.approx(var, rel=1e-10)


def test_posterior_contraction_and_psd(rng):
    x = rng.uniform(0, 7, 12)
    y = rng.normal(6, 1, 12)
    prior = gp.GpPrior(6.0, gp.Kernel(), 0.01)
    post = gp.posterior(prior, x, y, x)
    assert np.all(np.diag(post.cov) <= np.diag(prior.kernel(x)) + 1e-12)
    assert np.linalg.eigvalsh(post.cov).min() >= -1e-9 * np.trace(post.cov)


def test_posterior_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        gp.posterior(gp.GpPrior(), [0.0, 1.0], [1.0], [0.0])


def test_posterior_is_immutable():
    post = gp.posterior(gp.GpPrior(), [0.0, 1.0], [1.0, 2.0], [0.5])
    with pytest.raises(ValueError):
        post.mean[0] = 3.0


def test_draw_paths_zero_covariance():
    post = gp.GpPosterior(np.array([0.0, 1.0]), np.array([3.0, -1.0]), np.zeros((2, 2)))
    paths = gp.draw_paths(post, 5, seed=1)
    np.testing.assert_allclose(paths, np.tile([3.0, -1.0], (5, 1)))


def test_draw_paths_deterministic():
    post = gp.prior_on(gp.GpPrior(), np.linspace(0, 7, 15))
    np.testing.assert_array_equal(gp.draw_paths(post, 4, 11), gp.draw_paths(post, 4, 11))


def test_draw_paths_moments():
    post = gp.GpPosterior(np.array([0.0]), np.array([2.0]), np.array([[9.0]]))
    draws = gp.draw_paths(post, 100_000, seed=3)[:, 0]
    assert abs(draws.mean() - 2.0) < 0.03
    assert abs(draws.var() - 9.0) < 0.15


def test_draw_paths_singular_covariance():
    # nearly noiseless posterior on repeated-ish points is PSD but singular
    prior = gp.GpPrior(0.0, gp.Kernel(), 1e-14)
    x = np.linspace(0, 1, 5)
    post = gp.posterior(prior, x, np.sin(x), x)
    paths = gp.draw_paths(post, 3, seed=0)
    assert np.all(np.isfinite(paths))


def test_collapse_distinct():
    c = gp.collapse([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
    np.testing.assert_array_equal(c.counts, [1, 1, 1])
    np.testing.assert_allclose(c.group_means, [4.0, 5.0, 6.0])
    assert c.within_ss == 0.0


def test_collapse_repeat():
    c = gp.collapse([1.0, 1.0], [3.0, 5.0])
    np.testing.assert_allclose(c.unique_rows[:, 0], [1.0])
    np.testing.assert_array_equal(c.counts, [2])
    np.testing.assert_allclose(c.group_means, [4.0])
    assert c.within_ss == pytest.approx(2.0)


def test_collapse_first_appearance_order():
    c = gp.collapse([2.0, 1.0, 2.0], [1.0, 1.0, 3.0])
    np.testing.assert_allclose(c.unique_rows[:, 0], [2.0, 1.0])
    np.testing.assert_array_equal(c.counts, [2, 1])
    np.testing.assert_allclose(c.group_means, [2.0, 1.0])
    assert c.within_ss == pytest.approx(2.0)
    assert c.n == 3


def test_collapse_multivariate_exact_match():
    x = np.array([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0 + 1e-15]])
    c = gp.collapse(x, [1.0, 2.0, 3.0])
    assert c.n_unique == 2


def test_wrss_examples():
    c = gp.CollapsedData(np.array([[0.0], [1.0]]), np.array([2, 1]), np.array([4.0, 1.0]), 0.0)
    assert gp.wrss([4.0, 1.0], c) == 0.0
    assert gp.wrss([5.0, 0.0], c) == pytest.approx(3.0)
    with pytest.raises(DimensionMismatch):
        gp.wrss([1.0], c)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_wrss_plus_within_is_full_rss(seed):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 5, 20).astype(float)
    y = rng.normal(size=20)
    c = gp.collapse(x, y)
    h = rng.normal(size=c.n_unique)
    h_full = h[[int(np.flatnonzero(c.unique_rows[:, 0] == xi)[0]) for xi in x]]
    assert gp.wrss(h, c) + c.within_ss == pytest.approx(np.sum((y - h_full) ** 2), rel=1e-10)


def test_likelihood_ratio_constant_over_random_h(rng):
    """exp(-(wrss+within)/2s2) is proportional to the full-data likelihood."""
    x = rng.integers(0, 6, 25).astype(float)
    y = rng.normal(size=25)
    c = gp.collapse(x, y)
    idx = np.array([int(np.flatnonzero(c.unique_rows[:, 0] == xi)[0]) for xi in x])
    s2 = 0.01
    log_ratios = []
    for _ in range(1000):
        h = y.mean() + 0.05 * rng.normal(size=c.n_unique)
        collapsed = -(gp.wrss(h, c) + c.within_ss) / (2 * s2)
        full = -np.sum((y - h[idx]) ** 2) / (2 * s2)
        log_ratios.append(collapsed - full)
    ratios = np.exp(np.array(log_ratios))
    assert ratios.max() / ratios.min() - 1.0 < 1e-10
