"""Checkable quantities: information gain, gamma curves, the cumulative-variance
bound, the posterior RKHS-norm identity and Gaussian Renyi divergences."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigError, InputError
from .fitting import fit_line, fit_log_slope
from .kernels import KernelSpec, as_points, kernel_matrix
from .objectives import evaluate_objective
from .posterior import cholesky_with_jitter
from .qmc import powers_of_two, scrambled_sobol
from .rng import GAMMA_POOL, IDENTITY, stream

__all__ = [
    "GammaCurve",
    "CumvarReport",
    "information_gain",
    "greedy_gamma_curve",
    "cumvar_vs_gamma",
    "rkhs_norm_sides",
    "rkhs_norm_identity",
    "rkhs_identity_suite",
    "renyi_divergence",
    "fit_log_slope",
    "upper_checkpoints",
]

CUMVAR_SLACK = 1.05
MIN_SEEDS = 20
_LAMBDA_FLOOR = 1e-12


def information_gain(K, lam):
    """``1/2 log det(I + K / lam)`` from a Cholesky log-determinant."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InputError("Gram matrix must be square")
    if not lam > 0:
        raise InputError(f"lambda must be > 0, got {lam}")
    if K.shape[0] == 0:
        return 0.0
    if not np.allclose(K, K.T, rtol=1e-10, atol=1e-12):
        raise InputError("Gram matrix must be symmetric")
    M = np.eye(K.shape[0]) + 0.5 * (K + K.T) / lam
    L, _ = cholesky_with_jitter(M, "I + K/lam")
    return max(float(np.sum(np.log(np.diag(L)))), 0.0)


@dataclass(frozen=True)
class GammaCurve:
    """Greedy information-gain estimates ``gamma[T-1]`` for ``T = 1..T_max``."""

    T: np.ndarray
    gamma: np.ndarray
    lam: float
    spec: KernelSpec
    d: int
    pool_size: int
    seed: int
    selected: np.ndarray

    def at(self, T):
        T = np.asarray(T, dtype=int)
        if np.any(T < 1) or np.any(T > self.T[-1]):
            raise InputError(f"T outside [1, {self.T[-1]}]")
        return self.gamma[T - 1]

    def pool_description(self):
        return {"generator": "sobol", "size": self.pool_size, "seed": self.seed, "d": self.d}

    def log_slope(self, checkpoints=None):
        """Log-log slope of gamma over ``checkpoints`` (default: upper powers of two)."""
        cps = upper_checkpoints(int(self.T[-1])) if checkpoints is None else checkpoints
        return fit_log_slope(cps, self.at(cps))

    def polylog_fit(self, power=2, checkpoints=None):
        """Linear fit of gamma against ``(ln T)^power``; returns ``(slope, intercept, r2)``."""
        cps = np.asarray(
            [c for c in powers_of_two(int(self.T[-1])) if c > 1] if checkpoints is None
            else checkpoints
        )
        return fit_line(np.log(cps) ** power, self.at(cps))


def upper_checkpoints(T_max):
    """Powers of two in ``[T_max / 8, T_max]``, the upper part of a doubling sweep."""
    return [c for c in powers_of_two(T_max) if c * 8 >= T_max]


def greedy_gamma_curve(spec, d, lam, T_max, pool_size=None, seed=0):
    """Greedy max-variance design on a Sobol pool.

    Each step adds the pool point with the largest current posterior variance
    ``k_{t-1}(x, x)``; by the chain rule the information gain of the selected
    set grows by ``1/2 log(1 + k_{t-1}(x, x) / lam)``.
    """
    pool_size = 4096 * d if pool_size is None else int(pool_size)
    if T_max < 1:
        raise InputError(f"T_max must be >= 1, got {T_max}")
    if pool_size < T_max:
        raise InputError(f"pool_size {pool_size} smaller than T_max {T_max}")
    if not lam > 0:
        raise InputError(f"lambda must be > 0, got {lam}")
    spec.check_dimension(d)
    pool = scrambled_sobol(d, pool_size, stream(seed, GAMMA_POOL))
    var = np.ones(pool_size)
    rows = np.zeros((T_max, pool_size))
    gains = np.zeros(T_max)
    chosen = np.zeros(T_max, dtype=int)
    for t in range(T_max):
        j = int(np.argmax(var))
        v = max(float(var[j]), 0.0)
        chosen[t] = j
        gains[t] = 0.5 * math.log1p(v / lam)
        k_row = kernel_matrix(spec, pool[j : j + 1], pool)[0]
        row = (k_row - rows[:t, j] @ rows[:t]) / math.sqrt(v + lam)
        rows[t] = row
        var = var - row**2
    return GammaCurve(
        np.arange(1, T_max + 1), np.cumsum(gains), float(lam), spec, d, pool_size, seed,
        pool[chosen],
    )


@dataclass(frozen=True)
class CumvarReport:
    """Seed-averaged ``sum_t k_{t-1}(x_t, x_t)`` against ``4 gamma_T``."""

    T: np.ndarray
    gamma: np.ndarray
    cumvar: np.ndarray
    ratio: np.ndarray
    n_seeds: int

    @property
    def flagged(self):
        return [int(T) for T, r in zip(self.T, self.ratio) if r > CUMVAR_SLACK]

    @property
    def max_ratio(self):
        return float(np.max(self.ratio))

    @property
    def passed(self):
        return not self.flagged


def cumvar_vs_gamma(traces, curve, checkpoints=None):
    """Compare the seed average of ``sum k_{t-1}(x_t, x_t)`` with ``4 gamma_T``."""
    traces = list(traces)
    if not traces:
        raise InputError("need at least one trace")
    for tr in traces:
        if tr.spec != curve.spec or not math.isclose(tr.lam, curve.lam, rel_tol=1e-12):
            raise InputError("traces and gamma curve use different kernels or noise levels")
    if len(traces) < MIN_SEEDS:
        warnings.warn(
            f"only {len(traces)} seeds; the bound holds in expectation and "
            f"{MIN_SEEDS}+ seeds are recommended",
            stacklevel=2,
        )
    horizon = min(min(len(tr) for tr in traces), int(curve.T[-1]))
    cps = np.asarray(powers_of_two(horizon) if checkpoints is None else checkpoints, dtype=int)
    sums = np.array([np.cumsum(tr.k_var)[cps - 1] for tr in traces])
    cumvar = sums.mean(axis=0)
    gamma = curve.at(cps)
    return CumvarReport(cps, gamma, cumvar, cumvar / (4.0 * gamma), len(traces))


def rkhs_norm_sides(Lam, Phi, w, lam, alpha=1.0):
    """Both sides of the posterior-norm identity for ``f = phi(.)^T w``.

    The prior is ``k(x, x') = phi(x)^T diag(Lam) phi(x')`` and ``Phi`` holds
    the features of the queried points as rows. The left side is the RKHS norm
    of ``f`` under the tempered posterior kernel ``alpha^{-1} k_t``, computed
    from the kernel-space posterior covariance
    ``Lam - Lam Phi^T (Phi Lam Phi^T + lam I)^{-1} Phi Lam``. The right side is
    ``alpha (||f||_k^2 + lam^{-1} sum_s f(x_s)^2)``.
    """
    Lam = np.asarray(Lam, dtype=float)
    Phi = np.asarray(Phi, dtype=float).reshape(-1, Lam.size)
    w = np.asarray(w, dtype=float)
    t = Phi.shape[0]
    if t:
        LP = Phi * Lam  # rows: Lam phi(x_s)
        G = LP @ Phi.T + lam * np.eye(t)
        S = np.diag(Lam) - LP.T @ cho_solve(cho_factor(G), LP)
    else:
        S = np.diag(Lam)
    S = 0.5 * (S + S.T) / alpha
    left = float(w @ cho_solve(cho_factor(S), w))
    fx = Phi @ w
    right = alpha * (float(np.sum(w**2 / Lam)) + float(fx @ fx) / lam)
    return left, right


def _draw_instance(rng, feature_dim, t):
    while True:
        Lam = np.exp(rng.uniform(math.log(0.05), 0.0, feature_dim))
        if np.all(Lam >= _LAMBDA_FLOOR):
            break
    # features phi_j(x) = cos(omega_j x + b_j) at random scalar queries
    omega = rng.uniform(0.5, 6.0, feature_dim)
    phase = rng.uniform(0.0, 2.0 * math.pi, feature_dim)
    xs = rng.random(t)
    Phi = np.cos(np.outer(xs, omega) + phase)
    w = rng.standard_normal(feature_dim)
    return Lam, Phi, w


def rkhs_norm_identity(feature_dim, t, lam, alpha=1.0, seed=0):
    """Relative discrepancy between the two sides for one random instance."""
    if feature_dim < 1 or t < 0:
        raise InputError("need feature_dim >= 1 and t >= 0")
    if not lam > 0 or not 0 < alpha <= 1:
        raise InputError("need lam > 0 and alpha in (0, 1]")
    rng = stream(seed, IDENTITY, feature_dim, t)
    Lam, Phi, w = _draw_instance(rng, feature_dim, t)
    left, right = rkhs_norm_sides(Lam, Phi, w, lam, alpha)
    return abs(left - right) / abs(right)


@dataclass(frozen=True)
class IdentitySuite:
    errors: np.ndarray
    conditions: np.ndarray

    @property
    def max_error(self):
        return float(np.max(self.errors)) if self.errors.size else 0.0

    @property
    def worst_condition(self):
        return float(np.max(self.conditions)) if self.conditions.size else 1.0


def rkhs_identity_suite(n=100, seed=0, max_dim=16, max_t=12, lam=None, alpha=None):
    """Run the identity on ``n`` random instances (dimension, rounds, noise, temper)."""
    rng = stream(seed, IDENTITY)
    errors, conds = [], []
    for _ in range(n):
        p = int(rng.integers(1, max_dim + 1))
        t = int(rng.integers(0, max_t + 1))
        lam_i = float(np.exp(rng.uniform(math.log(0.01), math.log(10.0)))) if lam is None else lam
        alpha_i = float(rng.uniform(0.05, 1.0)) if alpha is None else alpha
        Lam, Phi, w = _draw_instance(rng, p, t)
        left, right = rkhs_norm_sides(Lam, Phi, w, lam_i, alpha_i)
        errors.append(abs(left - right) / abs(right))
        conds.append(np.linalg.cond(np.diag(1.0 / Lam) + Phi.T @ Phi / lam_i))
    return IdentitySuite(np.array(errors), np.array(conds))


def _values(f, X):
    if callable(getattr(f, "spec", None)) or hasattr(f, "coeffs"):
        return np.asarray(evaluate_objective(f, X), dtype=float)
    return np.asarray(f(X), dtype=float).reshape(-1)


def renyi_divergence(f, g, A, lam, beta):
    """Order-``beta`` Renyi divergence between the Gaussian reward models of ``f`` and ``g``.

    With equal noise variance ``lam`` it is ``beta / (2 lam) sum_s (f(x_s) - g(x_s))^2``.
    """
    if not beta > 0 or beta == 1:
        raise InputError(f"order beta must be > 0 and != 1, got {beta}")
    if not lam > 0:
        raise InputError(f"lambda must be > 0, got {lam}")
    X = as_points(A)
    if X.shape[0] == 0:
        return 0.0
    gap = _values(f, X) - _values(g, X)
    return beta / (2.0 * lam) * float(gap @ gap)


def regret_exponent_fit(horizons, mean_regret):
    """Log-log slope of mean cumulative regret over the horizons."""
    if len(horizons) < 3:
        raise ConfigError("a slope fit needs at least three horizons")
    return fit_log_slope(horizons, mean_regret)
