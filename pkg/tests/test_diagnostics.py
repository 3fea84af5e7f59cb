import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import norm

from fracgp.diagnostics import (
    cumvar_vs_gamma,
    fit_log_slope,
    greedy_gamma_curve,
    information_gain,
    renyi_divergence,
    rkhs_identity_suite,
    rkhs_norm_identity,
    rkhs_norm_sides,
)
from fracgp.errors import InputError
from fracgp.kernels import KernelSpec, kernel_matrix
from fracgp.loop import RegretTrace
from fracgp.objectives import objective_from_coefficients


def test_information_gain_examples():
    assert information_gain([[1.0]], 1.0) == pytest.approx(0.5 * math.log(2), abs=1e-15)
    assert information_gain([[1.0, 1.0], [1.0, 1.0]], 1.0) == pytest.approx(0.5 * math.log(3), abs=1e-15)
    assert information_gain(np.zeros((3, 3)), 0.5) == 0.0


def test_information_gain_matches_slogdet_and_permutation():
    X = np.random.default_rng(0).random(30)
    K = kernel_matrix(KernelSpec.matern(1.5, 4.0), X)
    ref = 0.5 * np.linalg.slogdet(np.eye(30) + K / 0.3)[1]
    assert information_gain(K, 0.3) == pytest.approx(ref, rel=1e-12)
    p = np.random.default_rng(1).permutation(30)
    assert abs(information_gain(K[np.ix_(p, p)], 0.3) - information_gain(K, 0.3)) <= 1e-12


def test_information_gain_guards():
    with pytest.raises(InputError):
        information_gain([[1.0, 0.5], [0.2, 1.0]], 1.0)
    with pytest.raises(InputError):
        information_gain([[1.0]], 0.0)


def test_greedy_curve_matches_direct_information_gain():
    spec = KernelSpec.rq(1.5, 0.2)
    curve = greedy_gamma_curve(spec, 1, 0.5, 40, 512, seed=2)
    for T in (1, 7, 40):
        K = kernel_matrix(spec, curve.selected[:T])
        assert curve.at(T) == pytest.approx(information_gain(K, 0.5), rel=1e-10)


def test_greedy_curve_monotone_and_deterministic():
    a = greedy_gamma_curve(KernelSpec.se(1.0), 1, 1.0, 64, 1024, seed=4)
    b = greedy_gamma_curve(KernelSpec.se(1.0), 1, 1.0, 64, 1024, seed=4)
    assert np.all(np.diff(a.gamma) >= 0) and a.gamma[0] >= 0
    np.testing.assert_array_equal(a.gamma, b.gamma)


def test_greedy_curve_pool_nesting():
    # pools from one seed are nested prefixes of the same scrambled sequence
    spec = KernelSpec.matern(1.5, 1.0)
    small = greedy_gamma_curve(spec, 1, 1.0, 128, 1024, seed=0)
    large = greedy_gamma_curve(spec, 1, 1.0, 128, 4096, seed=0)
    assert np.all(large.gamma >= small.gamma - 1e-9)


def test_greedy_curve_guard():
    with pytest.raises(InputError):
        greedy_gamma_curve(KernelSpec.se(1.0), 1, 1.0, 100, 50)


def _trace(spec, lam, k_var):
    tr = RegretTrace(spec, lam, 1.0, 1, 0)
    for k in k_var:
        tr.append([0.5], 0.0, 0.0, k, 0.0, False, 0.0)
    return tr


def test_cumvar_first_round_closed_form():
    spec = KernelSpec.se(1.0)
    curve = greedy_gamma_curve(spec, 1, 1.0, 4, 64)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = cumvar_vs_gamma([_trace(spec, 1.0, [1.0, 0.5, 0.2, 0.1])], curve)
    assert rep.gamma[0] == pytest.approx(0.5 * math.log(2))
    assert rep.ratio[0] == pytest.approx(1 / (2 * math.log(2)), rel=1e-12)
    assert rep.ratio[0] == pytest.approx(0.7213, abs=1e-4)


def test_cumvar_guards_and_warning():
    spec = KernelSpec.se(1.0)
    curve = greedy_gamma_curve(spec, 1, 1.0, 4, 64)
    with pytest.raises(InputError):
        cumvar_vs_gamma([], curve)
    with pytest.raises(InputError):
        cumvar_vs_gamma([_trace(spec, 0.1, [1.0])], curve)
    with pytest.warns(UserWarning):
        cumvar_vs_gamma([_trace(spec, 1.0, [1.0] * 4)], curve)


def test_cumvar_flags_excess():
    spec = KernelSpec.se(1.0)
    curve = greedy_gamma_curve(spec, 1, 1.0, 4, 64)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        # variances above the prior's are impossible; they only exercise the flag
        rep = cumvar_vs_gamma([_trace(spec, 1.0, [5.0] * 4)] * 20, curve)
    assert 4 in rep.flagged and not rep.passed


def test_identity_trivial_cases():
    assert rkhs_norm_identity(5, 0, 0.3) == pytest.approx(0.0, abs=1e-14)
    Lam = np.array([0.5, 1.0, 0.2, 0.8])
    Phi = np.random.default_rng(0).standard_normal((2, 4))
    w = np.linalg.svd(Phi)[2][-1]  # f vanishes at both queried points
    left, right = rkhs_norm_sides(Lam, Phi, w, 0.1)
    assert left == pytest.approx(float(np.sum(w**2 / Lam)), rel=1e-10)
    assert left == pytest.approx(right, rel=1e-10)


def test_identity_suite():
    suite = rkhs_identity_suite(100, seed=1)
    assert suite.max_error <= 1e-8
    assert suite.errors.shape == (100,)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 16), st.integers(0, 12), st.floats(0.01, 10), st.floats(0.05, 1.0),
       st.integers(0, 10_000))
def test_identity_property(p, t, lam, alpha, seed):
    assert rkhs_norm_identity(p, t, lam, alpha, seed) <= 1e-8


def renyi_by_quadrature(mu_p, mu_q, lam, beta):
    sd = math.sqrt(lam)
    lo, hi = min(mu_p, mu_q) - 40 * sd, max(mu_p, mu_q) + 40 * sd
    val, _ = quad(lambda y: math.exp(beta * norm.logpdf(y, mu_p, sd) + (1 - beta) * norm.logpdf(y, mu_q, sd)),
                  lo, hi, epsabs=0, epsrel=1e-12, limit=200)
    return math.log(val) / (beta - 1)


def test_renyi_examples():
    spec = KernelSpec.se(1.0)
    f = objective_from_coefficients(spec, [0.5], [1.0])
    g = objective_from_coefficients(spec, [0.5], [0.0 + 1e-300]).scaled(0.0)
    assert renyi_divergence(f, f, [[0.2], [0.7]], 1.0, 0.5) == 0.0
    assert renyi_divergence(f, g, [[0.5]], 1.0, 0.5) == pytest.approx(0.25)
    one = renyi_divergence(f, g, [[0.3]], 0.4, 0.7)
    assert renyi_divergence(f, g, [[0.3], [0.3]], 0.4, 0.7) == pytest.approx(2 * one)
    assert renyi_divergence(f, g, [[0.3]], 0.4, 0.7) == renyi_divergence(g, f, [[0.3]], 0.4, 0.7)


def test_renyi_against_numerical_integration():
    spec = KernelSpec.matern(1.5, 3.0)
    f = objective_from_coefficients(spec, [0.2, 0.6], [1.0, -0.5])
    g = objective_from_coefficients(spec, [0.4], [0.8])
    A = np.array([0.1, 0.35, 0.9])
    for lam, beta in [(0.5, 0.3), (1.0, 2.0), (0.1, 0.8)]:
        expect = sum(renyi_by_quadrature(f(x), g(x), lam, beta) for x in A)
        assert renyi_divergence(f, g, A, lam, beta) == pytest.approx(expect, rel=1e-8)


def test_renyi_alpha_identity():
    # 2 D_alpha = alpha / lam * sum of squared gaps
    gap = lambda X: np.asarray(X).reshape(-1) * 0 + 0.7  # noqa: E731
    zero = lambda X: np.zeros(len(np.asarray(X).reshape(-1)))  # noqa: E731
    A = np.linspace(0, 1, 5)
    assert 2 * renyi_divergence(gap, zero, A, 0.2, 0.3) == pytest.approx(0.3 / 0.2 * 5 * 0.49)


def test_renyi_guards():
    f = lambda X: np.zeros(len(X))  # noqa: E731
    with pytest.raises(InputError):
        renyi_divergence(f, f, [0.1], 1.0, 1.0)
    with pytest.raises(InputError):
        renyi_divergence(f, f, [0.1], 1.0, -0.5)
    with pytest.raises(InputError):
        renyi_divergence(f, f, [0.1], 0.0, 0.5)


def test_fit_log_slope_examples():
    x = np.logspace(0, 2, 20)
    slope, _, r2 = fit_log_slope(x, np.sqrt(x))
    assert slope == pytest.approx(0.5, abs=1e-12) and r2 == pytest.approx(1.0)
    assert fit_log_slope(x, np.full(20, 3.0))[0] == pytest.approx(0.0, abs=1e-12)
    noise = np.random.default_rng(0).standard_normal(20)
    assert fit_log_slope(x, 3 * x**1.25 * (1 + 0.01 * noise))[0] == pytest.approx(1.25, abs=0.02)


def test_fit_log_slope_guards():
    with pytest.raises(InputError):
        fit_log_slope([1, 2, 3], [1, 0, 2])
    with pytest.raises(InputError):
        fit_log_slope([1, 2], [1, 2])
