"""Sequential alpha-fractional GP posterior.

The tempered posterior after ``t`` observations has mean

    mu_t(x) = k(x, A)^T (K + lam I)^{-1} y

and covariance ``alpha^{-1} k_t(x, x')`` where ``k_t`` is the usual untempered
posterior kernel. Only the lower Cholesky factor of ``K + lam I`` and the
half-solve ``beta = L^{-1} y`` are stored, together with ``W = L^{-1}``
bordered alongside ``L``. The mean at new points is ``V^T beta`` with
``V = L^{-1} k(A, X) = W k(A, X)``; a triangular multiply is cheaper than a
triangular solve with many right-hand sides.

States are immutable from the caller's side. Successive states produced by
:func:`incorporate` share one growable factor buffer: a state only ever reads
the leading ``t x t`` block, and a write into row ``t`` happens only when the
buffer has not already been extended past ``t`` by another branch. Otherwise
the buffer is copied first.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import blas, solve_triangular

from .errors import ConfigError, InputError, NumericalError
from .kernels import KernelSpec, as_points, kernel_matrix

log = logging.getLogger(__name__)

JITTER_START = 1e-10
JITTER_STOP = 1e-6

_dtrsm = blas.get_blas_funcs("trsm", dtype=np.float64)
_dsyrk = blas.get_blas_funcs("syrk", dtype=np.float64)
_dtrmm = blas.get_blas_funcs("trmm", dtype=np.float64)
_dtrmv = blas.get_blas_funcs("trmv", dtype=np.float64)


def jitter_levels():
    """Relative jitter ladder 1e-10, 1e-9, ..., 1e-6."""
    level = JITTER_START
    while level <= JITTER_STOP * (1 + 1e-9):
        yield level
        level *= 10.0


def cholesky_with_jitter(M, what="matrix"):
    """Lower Cholesky factor of ``M``, escalating diagonal jitter on breakdown.

    Returns ``(L, jitter)`` where ``jitter`` is the absolute amount added to the
    diagonal (0.0 when none was needed).
    """
    try:
        return np.linalg.cholesky(M), 0.0
    except np.linalg.LinAlgError:
        pass
    scale = float(np.max(np.diag(M)))
    if not scale > 0:
        scale = 1.0
    eye = np.eye(M.shape[0])
    for level in jitter_levels():
        try:
            return np.linalg.cholesky(M + level * scale * eye), level * scale
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(f"Cholesky of {what} failed with jitter up to {JITTER_STOP:g}")


class _Buffer:
    """Growable storage for points, observations and the Cholesky factor."""

    def __init__(self, d, capacity):
        capacity = max(int(capacity), 4)
        self.L = np.zeros((capacity, capacity), order="F")
        self.W = np.zeros((capacity, capacity), order="F")
        self.X = np.zeros((capacity, d))
        self.y = np.zeros(capacity)
        self.beta = np.zeros(capacity)
        self.jitter = np.zeros(capacity)
        self.n = 0

    @property
    def capacity(self):
        return self.L.shape[0]

    def grown_copy(self, n, capacity):
        new = _Buffer(self.X.shape[1], capacity)
        new.L[:n, :n] = self.L[:n, :n]
        new.W[:n, :n] = self.W[:n, :n]
        new.X[:n] = self.X[:n]
        new.y[:n] = self.y[:n]
        new.beta[:n] = self.beta[:n]
        new.jitter[:n] = self.jitter[:n]
        new.n = n
        return new


@dataclass(frozen=True, eq=False)
class PosteriorState:
    """Posterior after ``t`` observations; create with :func:`init_state`."""

    spec: KernelSpec
    lam: float
    alpha: float
    d: int
    t: int
    _buf: _Buffer = field(repr=False)

    @property
    def points(self):
        """Queried points ``A_t`` as a read-only ``(t, d)`` view."""
        view = self._buf.X[: self.t]
        view.flags.writeable = False
        return view

    @property
    def y(self):
        view = self._buf.y[: self.t]
        view.flags.writeable = False
        return view

    @property
    def chol(self):
        """Lower Cholesky factor of ``k(A_t, A_t) + lam I`` (plus any jitter)."""
        return self._buf.L[: self.t, : self.t].copy()

    @property
    def jitter(self):
        return self._buf.jitter[: self.t].copy()

    @property
    def beta(self):
        return self._buf.beta[: self.t].copy()

    @property
    def weights(self):
        """Solution ``w`` of ``(K + lam I) w = y``."""
        if self.t == 0:
            return np.zeros(0)
        return _dtrsm(1.0, self._buf.L[: self.t, : self.t], self.beta[:, None], lower=1, trans_a=1)[:, 0]

    def solve_lower(self, B):
        """``L^{-1} B`` for a ``(t, m)`` right-hand side."""
        if self.t == 0:
            return np.zeros((0,) + np.shape(B)[1:])
        return _dtrmm(1.0, self._buf.W[: self.t, : self.t], np.asfortranarray(B), lower=1)

    def __repr__(self):
        return (
            f"PosteriorState(spec={self.spec}, lam={self.lam}, alpha={self.alpha}, "
            f"d={self.d}, t={self.t})"
        )


@dataclass(frozen=True)
class Prediction:
    """Posterior moments at probe points.

    ``cov`` is the untempered covariance ``k_t(X, X)``; ``var`` is the tempered
    variance ``alpha^{-1} diag(cov)``. ``solved`` caches ``L^{-1} k(A_t, X)``.
    """

    mean: np.ndarray
    cov: np.ndarray
    var: np.ndarray
    solved: np.ndarray

    def __iter__(self):
        # unpacks as (mean, cov, var)
        return iter((self.mean, self.cov, self.var))


def _validate(lam, alpha):
    try:
        lam, alpha = float(lam), float(alpha)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"lambda and alpha must be real numbers: {exc}") from None
    if not (math.isfinite(lam) and lam > 0):
        raise ConfigError(f"noise variance lambda must be > 0, got {lam!r}")
    if not 0 < alpha <= 1:
        raise ConfigError(f"temper alpha must lie in (0, 1], got {alpha!r}")


def init_state(spec, lam, alpha=1.0, d=1, capacity=64):
    """Prior state ``GP(0, alpha^{-1} k)`` with no observations."""
    _validate(lam, alpha)
    if d < 1:
        raise ConfigError(f"dimension must be >= 1, got {d}")
    return PosteriorState(spec, float(lam), float(alpha), int(d), 0, _Buffer(d, capacity))


def _writable_buffer(state):
    buf = state._buf
    if buf.n == state.t and state.t < buf.capacity:
        return buf
    capacity = buf.capacity * 2 if state.t >= buf.capacity else buf.capacity
    return buf.grown_copy(state.t, capacity)


def incorporate(state, x, y, solved=None):
    """Add one observation ``(x, y)`` by bordering the Cholesky factor.

    ``solved`` may carry a precomputed ``L^{-1} k(A_t, x)`` (for example a
    column of :attr:`Prediction.solved`) to skip the triangular solve.
    """
    x = as_points(np.reshape(x, (1, -1)) if np.ndim(x) else x, state.d)
    if x.shape[0] != 1:
        raise InputError("incorporate takes a single point")
    y = float(y)
    if not math.isfinite(y):
        raise InputError(f"observation must be finite, got {y}")
    t = state.t
    if t:
        if solved is None:
            solved = state.solve_lower(kernel_matrix(state.spec, state.points, x))[:, 0]
        row = np.asarray(solved, dtype=float).reshape(t)
        pivot_sq = 1.0 + state.lam - float(row @ row)
    else:
        row = np.zeros(0)
        pivot_sq = 1.0 + state.lam
    jitter = 0.0
    if not pivot_sq > 0:
        scale = 1.0 + state.lam
        for level in jitter_levels():
            if pivot_sq + level * scale > 0:
                jitter = level * scale
                break
        else:
            raise NumericalError(
                f"Cholesky update broke down at t={t + 1} (pivot^2={pivot_sq:.3e}) "
                f"even with jitter {JITTER_STOP:g}"
            )
        log.debug("jitter %.3e added at t=%d", jitter, t + 1)
    pivot = math.sqrt(pivot_sq + jitter)
    buf = _writable_buffer(state)
    buf.L[t, :t] = row
    buf.L[t, t] = pivot
    if t:
        # last row of the bordered inverse: [-row^T W / pivot, 1 / pivot]
        buf.W[t, :t] = _dtrmv(buf.W[:t, :t], row, lower=1, trans=1) / -pivot
    buf.W[t, t] = 1.0 / pivot
    buf.X[t] = x[0]
    buf.y[t] = y
    buf.beta[t] = (y - float(row @ buf.beta[:t])) / pivot
    buf.jitter[t] = jitter
    buf.n = t + 1
    return PosteriorState(state.spec, state.lam, state.alpha, state.d, t + 1, buf)


def predict(state, X, full_cov=True):
    """Posterior mean, untempered covariance and tempered variance at ``X``."""
    X = as_points(X, state.d)
    prior = kernel_matrix(state.spec, X) if full_cov else None
    if state.t == 0:
        mean = np.zeros(X.shape[0])
        cov = prior if full_cov else np.ones(X.shape[0])
        solved = np.zeros((0, X.shape[0]))
    else:
        # k(X, A)^T is already Fortran-ordered, so the solve needs no copy
        solved = state.solve_lower(kernel_matrix(state.spec, X, state.points).T)
        mean = solved.T @ state._buf.beta[: state.t]
        if full_cov:
            # upper triangle of V^T V, mirrored: exactly symmetric at half the flops
            upper = np.triu(_dsyrk(1.0, solved, trans=1))
            cov = prior - (upper + np.triu(upper, 1).T)
        else:
            cov = 1.0 - np.einsum("ij,ij->j", solved, solved)
    diag = np.diag(cov) if full_cov else cov
    var = np.maximum(diag, 0.0) / state.alpha
    return Prediction(mean, cov, var, solved)


def rebuild(state):
    """Refactorize ``k(A, A) + lam I`` from scratch; the oracle for :func:`incorporate`.

    Per-point jitter recorded by earlier incremental updates is replayed so the
    two paths factor the same matrix.
    """
    fresh = init_state(state.spec, state.lam, state.alpha, state.d, capacity=max(state.t, 4))
    if state.t == 0:
        return fresh
    X = np.array(state.points)
    M = kernel_matrix(state.spec, X) + np.diag(state.lam + state.jitter)
    L, extra = cholesky_with_jitter(M, "k(A,A) + lam I")
    buf = fresh._buf
    t = state.t
    buf.L[:t, :t] = L
    buf.W[:t, :t] = solve_triangular(L, np.eye(t), lower=True)
    buf.X[:t] = X
    buf.y[:t] = state.y
    buf.jitter[:t] = state.jitter + extra
    buf.beta[:t] = _dtrsm(1.0, L, np.asfortranarray(state.y[:, None]), lower=1)[:, 0]
    buf.n = t
    log.debug("rebuild t=%d cond(K+lam I)=%.3e", t, condition_number(state))
    return PosteriorState(state.spec, state.lam, state.alpha, state.d, t, buf)


def condition_number(state):
    """2-norm condition number of ``k(A_t, A_t) + lam I``."""
    if state.t == 0:
        return 1.0
    M = kernel_matrix(state.spec, state.points) + state.lam * np.eye(state.t)
    return float(np.linalg.cond(M))


def state_from_data(spec, lam, alpha, X, y):
    """Posterior built by sequential incorporation of ``(X, y)``."""
    X = as_points(X)
    state = init_state(spec, lam, alpha, X.shape[1], capacity=max(len(X), 4))
    for xi, yi in zip(X, np.asarray(y, dtype=float)):
        state = incorporate(state, xi, yi)
    return state


def state_to_dict(state):
    """JSON-ready snapshot ``{kernel, lambda, alpha, d, points, obs}``."""
    return {
        "kernel": state.spec.to_dict(),
        "lambda": state.lam,
        "alpha": state.alpha,
        "d": state.d,
        "points": np.asarray(state.points).tolist(),
        "obs": np.asarray(state.y).tolist(),
    }


def state_from_dict(data):
    spec = KernelSpec.from_dict(data["kernel"])
    X = np.asarray(data["points"], dtype=float).reshape(-1, int(data["d"]))
    if X.shape[0] == 0:
        return init_state(spec, data["lambda"], data["alpha"], int(data["d"]))
    return state_from_data(spec, data["lambda"], data["alpha"], X, data["obs"])
