import numpy as np
import pytest

from conftest import beta_grid_distance2
from gpfbst import hypothesis as hyp
from gpfbst.exceptions import RankDeficient
from gpfbst.measure import explicit_pmf, finite_uniform


def _random_triple(rng):
    n = int(rng.integers(3, 12))
    points = np.sort(rng.choice(np.arange(0.0, 20.0, 0.5), n, replace=False))
    w = explicit_pmf(points, rng.dirichlet(np.ones(n)))
    b = hyp.intercept_slope() if rng.random() < 0.5 else hyp.intercept_only()
    h = rng.normal(size=n) * 3
    return points, w, b, h


def test_design_matrix_examples():
    np.testing.assert_array_equal(hyp.design_matrix(hyp.intercept_only(), [1, 2, 3]),
                                  np.ones((3, 1)))
    np.testing.assert_array_equal(hyp.design_matrix(hyp.intercept_slope(), [0, 1]),
                                  [[1, 0], [1, 1]])
    grid = np.arange(0, 7.5, 0.5)
    d = hyp.design_matrix(hyp.intercept_slope(), grid)
    assert d.shape == (15, 2)
    np.testing.assert_array_equal(d[:, 1], grid)


def test_design_matrix_rejects_empty_and_bad_shapes():
    with pytest.raises(ValueError):
        hyp.design_matrix(hyp.intercept_only(), np.empty((0, 1)))
    bad = hyp.LinearBasis(2, lambda x: np.ones((len(x), 3)), "bad")
    with pytest.raises(ValueError, match="shape"):
        hyp.design_matrix(bad, [0.0, 1.0])


def test_presets_and_tabulated():
    assert hyp.preset("intercept-only").k == 1
    assert hyp.preset("intercept+slope", dim=2).k == 3
    with pytest.raises(KeyError):
        hyp.preset("quadratic")
    tab = hyp.tabulated([0.0, 1.0, 2.0], [[1, 0], [1, 1], [1, 4]], "quad")
    np.testing.assert_array_equal(tab([2.0, 0.0]), [[1, 4], [1, 0]])
    with pytest.raises(KeyError):
        tab([3.0])


def test_projection_m_two_points():
    m = hyp.projection_m(hyp.intercept_only(), [0.0, 1.0]).matrix
    np.testing.assert_allclose(m, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-12)


def test_projection_m_trace_fifteen_points():
    m = hyp.projection_m(hyp.intercept_slope(), np.arange(0.5, 7.6, 0.5)).matrix
    assert np.trace(m) == pytest.approx(13.0, abs=1e-9)


def test_projection_m_idempotent_and_annihilates(rng):
    for _ in range(20):
        n = int(rng.integers(3, 15))
        pts = rng.normal(size=n)
        b = hyp.intercept_slope()
        m = hyp.projection_m(b, pts).matrix
        np.testing.assert_allclose(m @ m, m, atol=1e-9)
        np.testing.assert_allclose(m, m.T, atol=1e-12)
        np.testing.assert_allclose(m @ b(pts), 0.0, atol=1e-9)


def test_projection_m_rank_deficient():
    with pytest.raises(RankDeficient):
        hyp.projection_m(hyp.intercept_slope(), [1.0, 1.0, 1.0])
    with pytest.raises(RankDeficient):
        hyp.projection_m(hyp.intercept_slope(), [1.0])


def test_projection_n_hand_example():
    # min over beta of 0.5 (0 - beta)^2 + 0.5 (2 - beta)^2 is 1 at beta = 1
    w = explicit_pmf([0.0, 1.0], [0.5, 0.5])
    n_mat = hyp.projection_n(hyp.intercept_only(), [0.0, 1.0], w).matrix
    h = np.array([0.0, 2.0])
    assert h @ n_mat @ h == pytest.approx(1.0, abs=1e-12)


def test_projection_n_uniform_reduces_to_scaled_m(rng):
    pts = np.sort(rng.normal(size=8))
    b = hyp.intercept_slope()
    n_mat = hyp.projection_n(b, pts, finite_uniform(pts)).matrix
    m = hyp.projection_m(b, pts).matrix
    np.testing.assert_allclose(n_mat, m / 8, atol=1e-12)


def test_projection_n_annihilates_span(rng):
    pts = np.arange(6.0)
    w = explicit_pmf(pts, rng.dirichlet(np.ones(6)))
    b = hyp.intercept_slope()
    h = b(pts) @ np.array([1.3, -0.4])
    n_mat = hyp.projection_n(b, pts, w).matrix
    assert abs(h @ n_mat @ h) < 1e-12


def test_projection_n_drops_zero_weight_atoms():
    w = explicit_pmf([0.0, 1.0, 2.0], [0.5, 0.0, 0.5])
    pair = hyp.projection_n(hyp.intercept_only(), [0.0, 1.0, 2.0], w)
    assert pair.matrix.shape == (2, 2)
    np.testing.assert_array_equal(pair.points.ravel(), [0.0, 2.0])


def test_projection_n_rank_deficient():
    w = explicit_pmf([0.0, 1.0], [1.0, 0.0])
    with pytest.raises(RankDeficient):
        hyp.projection_n(hyp.intercept_slope(), [0.0, 1.0], w)


def test_lemma1_linear_h_recovers_beta():
    pts = np.linspace(0, 3, 7)
    w = finite_uniform(pts)
    beta, dist = hyp.lemma1_project(2.0 - 0.5 * pts, hyp.intercept_slope(), w)
    np.testing.assert_allclose(beta, [2.0, -0.5], atol=1e-12)
    assert dist == pytest.approx(0.0, abs=1e-7)


def test_lemma1_intercept_is_weighted_mean(rng):
    pts = np.arange(5.0)
    p = rng.dirichlet(np.ones(5))
    h = rng.normal(size=5)
    beta, _ = hyp.lemma1_project(h, hyp.intercept_only(), explicit_pmf(pts, p))
    assert beta[0] == pytest.approx(np.sum(p * h), abs=1e-12)


def test_lemma1_matches_h_n_h(rng):
    for _ in range(50):
        pts, w, b, h = _random_triple(rng)
        _, dist = hyp.lemma1_project(h, b, w)
        n_mat = hyp.projection_n(b, pts, w).matrix
        assert dist ** 2 == pytest.approx(h @ n_mat @ h, abs=1e-8)


def test_lemma1_matches_beta_grid(rng):
    for _ in range(5):
        pts, w, b, h = _random_triple(rng)
        _, dist = hyp.lemma1_project(h, b, w)
        oracle = beta_grid_distance2(h, b(pts), w.weights)
        assert oracle >= dist ** 2 - 1e-12
        assert oracle - dist ** 2 < 1e-6


def test_lemma1_reparameterization_invariance(rng):
    pts = np.linspace(0, 5, 9)
    w = explicit_pmf(pts, rng.dirichlet(np.ones(9)))
    h = np.sin(pts)
    b = hyp.intercept_slope()
    t = np.array([[2.0, 1.0], [0.5, -3.0]])
    _, d1 = hyp.lemma1_project(h, b, w)
    beta2, d2 = hyp.lemma1_project(h, hyp.reparameterized(b, t), w)
    assert d1 == pytest.approx(d2, abs=1e-8)
    beta1, _ = hyp.lemma1_project(h, b, w)
    np.testing.assert_allclose(t @ beta2, beta1, atol=1e-9)


def test_lemma1_length_mismatch():
    w = finite_uniform([0.0, 1.0])
    with pytest.raises(ValueError):
        hyp.lemma1_project([1.0], hyp.intercept_only(), w)
