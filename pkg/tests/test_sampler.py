import numpy as np
import pytest

from fracgp.errors import ConfigError, InputError
from fracgp.kernels import KernelSpec
from fracgp.posterior import init_state, predict, state_from_data
from fracgp.sampler import draw_path, generate_candidates, sample_path, select_argmax


def star_discrepancy_2d(P):
    """Exact star discrepancy by enumerating anchored boxes at point coordinates."""
    n = len(P)
    us = np.unique(np.concatenate([P[:, 0], [1.0]]))
    vs = np.unique(np.concatenate([P[:, 1], [1.0]]))
    worst = 0.0
    for u in us:
        for v in vs:
            vol = u * v
            open_count = np.sum((P[:, 0] < u) & (P[:, 1] < v))
            closed_count = np.sum((P[:, 0] <= u) & (P[:, 1] <= v))
            worst = max(worst, vol - open_count / n, closed_count / n - vol)
    return worst


def test_grid_endpoints():
    np.testing.assert_array_equal(generate_candidates(1, 3, "grid").points[:, 0], [0, 0.5, 1])


def test_grid_needs_perfect_power():
    assert generate_candidates(2, 16, "grid").points.shape == (16, 2)
    with pytest.raises(ConfigError):
        generate_candidates(2, 15, "grid")


def test_sobol_deterministic_and_distinct():
    a = generate_candidates(2, 100, "sobol", seed=7).points
    b = generate_candidates(2, 100, "sobol", seed=7).points
    np.testing.assert_array_equal(a, b)
    assert len(np.unique(a, axis=0)) == 100
    assert a.min() >= 0 and a.max() <= 1
    assert not np.array_equal(a, generate_candidates(2, 100, "sobol", seed=8).points)


def test_budget_and_generator_errors():
    with pytest.raises(ConfigError):
        generate_candidates(1, 20000, "sobol")
    with pytest.raises(ConfigError):
        generate_candidates(1, 0, "sobol")
    with pytest.raises(ConfigError):
        generate_candidates(1, 8, "halton")


def test_sobol_beats_uniform_discrepancy():
    sobol = np.mean([star_discrepancy_2d(generate_candidates(2, 64, "sobol", s).points) for s in range(20)])
    unif = np.mean([star_discrepancy_2d(np.random.default_rng(s).random((64, 2))) for s in range(20)])
    assert sobol < unif


def test_tempered_path_scaling():
    rng = np.random.default_rng(0)
    X, y = rng.random(10), rng.standard_normal(10)
    C = generate_candidates(1, 64, "grid")
    z = rng.standard_normal(64)
    p1 = draw_path(state_from_data(KernelSpec.se(2.0), 0.1, 1.0, X, y), C, normals=z)
    pa = draw_path(state_from_data(KernelSpec.se(2.0), 0.1, 0.3, X, y), C, normals=z)
    mu = p1.moments.mean
    np.testing.assert_allclose(pa.values, mu + 0.3**-0.5 * (p1.values - mu), atol=1e-12)


def test_prior_monte_carlo_variance():
    s = init_state(KernelSpec.se(1.0), 0.1, 0.5)
    C = generate_candidates(1, 5, "grid")
    gen = np.random.default_rng(1)
    draws = np.array([sample_path(s, C, gen) for _ in range(10_000)])
    np.testing.assert_allclose(draws.var(axis=0), 2.0, rtol=0.05)


def test_marginals_match_predict():
    rng = np.random.default_rng(2)
    s = state_from_data(KernelSpec.matern(1.5, 3.0), 0.1, 0.6, rng.random(8), rng.standard_normal(8))
    C = generate_candidates(1, 6, "grid")
    pred = predict(s, C.points)
    gen = np.random.default_rng(3)
    n = 10_000
    draws = np.array([sample_path(s, C, gen) for _ in range(n)])
    se = np.sqrt(pred.var / n)
    assert np.all(np.abs(draws.mean(axis=0) - pred.mean) <= 3 * se)
    np.testing.assert_allclose(draws.var(axis=0), pred.var, rtol=0.05)


def test_single_candidate_is_scalar_normal():
    s = state_from_data(KernelSpec.se(1.0), 0.5, 0.5, [0.2, 0.7], [1.0, -1.0])
    z = np.array([1.7])
    out = draw_path(s, [[0.4]], normals=z)
    pred = predict(s, [[0.4]])
    assert out.values[0] == pytest.approx(pred.mean[0] + np.sqrt(pred.var[0]) * 1.7, rel=1e-10)


def test_seeded_path_determinism():
    s = state_from_data(KernelSpec.rq(1.5, 0.2), 0.1, 0.5, [0.1, 0.6], [0.3, 0.2])
    C = generate_candidates(1, 32, "sobol", 5)
    a = sample_path(s, C, np.random.default_rng(9))
    b = sample_path(s, C, np.random.default_rng(9))
    assert a.tobytes() == b.tobytes()


def test_select_argmax_rules():
    C = np.array([[0.1], [0.2], [0.3]])
    assert select_argmax([0.1, 0.9, 0.4], C)[0] == 1
    assert select_argmax([0.7, 0.7], C[:2])[0] == 0
    vals = np.array([0.3, -1.0, 2.5])
    assert select_argmax(vals + 100, C)[0] == select_argmax(3 * vals - 2, C)[0] == 2


def test_select_argmax_errors():
    with pytest.raises(InputError):
        select_argmax([], np.zeros((0, 1)))
    with pytest.raises(InputError):
        select_argmax([np.nan, 1.0], [[0.1], [0.2]])
    with pytest.raises(InputError):
        draw_path(init_state(KernelSpec.se(1.0), 0.1), np.zeros((0, 1)))


def test_collapsed_variance_returns_mean():
    s = state_from_data(KernelSpec.se(1.0), 1e-10, 1.0, [0.5] * 3, [1.0] * 3)
    out = draw_path(s, [[0.5]], normals=np.array([5.0]))
    assert out.values[0] == pytest.approx(1.0, abs=1e-4)
