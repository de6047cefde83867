import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dppflow import gmm
from dppflow.errors import DegenerateInputError, InvalidInputError
from dppflow.gmm import GmmSpec

from conftest import rel_err


def test_circle_uniform():
    g = gmm.make_random_gmm(0, 10, 2, "uniform", "circle")
    assert np.all(g.weights == 0.1)
    ang = np.arctan2(g.means[:, 1], g.means[:, 0]) % (2 * np.pi)
    np.testing.assert_allclose(ang, 2 * np.pi * np.arange(10) / 10, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(g.means, axis=1), gmm.CIRCLE_RADIUS)


def test_random_layout_deterministic_and_separated():
    a = gmm.make_random_gmm(59)
    b = gmm.make_random_gmm(59)
    assert np.array_equal(a.means, b.means) and np.array_equal(a.weights, b.weights)
    for seed in range(20):
        g = gmm.make_random_gmm(seed)
        d = np.linalg.norm(g.means[:, None] - g.means[None], axis=-1)[np.triu_indices(10, 1)]
        assert d.min() >= 6 * g.scales.max()
        assert np.all((g.scales >= 0.25) & (g.scales <= 0.35))
        assert np.all(np.abs(g.means) <= 4)
        assert g.weights.sum() == 1.0


def test_layout_failure():
    with pytest.raises(DegenerateInputError):
        gmm.make_random_gmm(0, 200, 2)


def test_spec_validation():
    with pytest.raises(InvalidInputError):
        GmmSpec([[0.0, 0.0]], [0.0], [1.0])
    with pytest.raises(InvalidInputError):
        GmmSpec([[0.0, 0.0], [1.0, 1.0]], [1.0, 1.0], [0.3, 0.3])


def test_source_8gauss():
    s = gmm.make_source_8gauss(1)
    assert np.all(s.weights == 1 / 8)
    np.testing.assert_allclose(np.linalg.norm(s.means, axis=1), 4.0)
    x = gmm.gmm_sample(s, np.random.default_rng(0), 100_000)
    d = np.linalg.norm(x[:, None] - s.means[None], axis=-1).min(axis=1)
    assert np.mean(d <= 4 * 0.1) >= 0.999


def test_sample_tiny_sigma():
    g = GmmSpec([[1.0, -2.0]], [1e-9], [1.0])
    x = gmm.gmm_sample(g, np.random.default_rng(0), 50)
    assert np.all(np.abs(x - [1.0, -2.0]) <= 6e-9)


def test_sample_weights_and_determinism():
    g = gmm.make_random_gmm(3)
    x = gmm.gmm_sample(g, np.random.default_rng(1), 100_000)
    near = np.argmin(np.linalg.norm(x[:, None] - g.means[None], axis=-1), axis=1)
    freq = np.bincount(near, minlength=10) / len(x)
    assert np.max(np.abs(freq - g.weights)) <= 0.01
    assert np.array_equal(x[:10], gmm.gmm_sample(g, np.random.default_rng(1), 100_000)[:10])


def test_score_examples(rng):
    g = GmmSpec([[0.0, 0.0]], [1.0], [1.0])
    x = rng.standard_normal(2)
    np.testing.assert_allclose(gmm.gmm_noised_score(g, x, 0.0), -x, rtol=1e-15)
    two = GmmSpec([[-2.0, 0.0], [2.0, 0.0]], [0.5, 0.5], [0.5, 0.5])
    s = gmm.gmm_noised_score(two, np.array([0.0, 1.3]), 0.2)
    assert abs(s[0]) <= 1e-15


def fd_score(spec, x, sigma_t, step=1e-5):
    out = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        out[i] = (gmm.gmm_logpdf(spec, x + e, sigma_t) - gmm.gmm_logpdf(spec, x - e, sigma_t)) / (2 * step)
    return out


def test_score_matches_fd():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        g = gmm.make_random_gmm(seed, 5, 2)
        x = rng.uniform(-4, 4, 2)
        sig = rng.choice([0.0, 0.1, 1.0, 5.0])
        assert rel_err(gmm.gmm_noised_score(g, x, sig), fd_score(g, x, sig)) <= 1e-6


def test_logpdf_matches_direct_sum(rng):
    g = gmm.make_random_gmm(4, 4, 3)
    x = rng.standard_normal(3)
    var = g.scales ** 2 + 0.3 ** 2
    dens = np.sum(g.weights * np.exp(-0.5 * np.sum((x - g.means) ** 2, axis=1) / var) / (2 * np.pi * var) ** 1.5)
    assert gmm.gmm_logpdf(g, x, 0.3) == pytest.approx(np.log(dens), rel=1e-12)


def test_hvp_matches_fd_of_score():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        g = gmm.make_random_gmm(seed, 4, 2)
        x, v = rng.uniform(-3, 3, 2), rng.standard_normal(2)
        step = 1e-5
        fd = (gmm.gmm_noised_score(g, x + step * v, 0.5) - gmm.gmm_noised_score(g, x - step * v, 0.5)) / (2 * step)
        assert rel_err(gmm.gmm_score_hvp(g, x, 0.5, v), fd) <= 1e-6


def test_count_modes_examples():
    g = gmm.make_random_gmm(2)
    assert gmm.count_modes(g.means, g) == 10
    assert gmm.count_modes(np.zeros((0, 2)), g) == 0
    assert gmm.count_modes(np.repeat(g.means[:1], 7, axis=0), g) == 1
    with pytest.raises(InvalidInputError):
        gmm.count_modes(g.means, g, radius_mult=0)


def test_count_modes_radius():
    g = GmmSpec([[0.0, 0.0], [10.0, 0.0]], [1.0, 1.0], [0.5, 0.5])
    assert gmm.count_modes([[2.9, 0.0]], g) == 1
    assert gmm.count_modes([[3.1, 0.0]], g) == 0
    assert gmm.count_modes([[3.1, 0.0]], g, radius_mult=4) == 1


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 30), st.integers(1, 30))
def test_count_modes_monotone(seed, n, m):
    rng = np.random.default_rng(seed)
    g = gmm.make_random_gmm(seed % 50)
    a = rng.uniform(-5, 5, (n, 2))
    b = rng.uniform(-5, 5, (m, 2))
    assert gmm.count_modes(np.vstack([a, b]), g) >= gmm.count_modes(a, g)
