"""Ground-truth objectives in the prior RKHS.

An objective is a finite kernel expansion ``f(x) = sum_i c_i k(x, z_i)``. Its
RKHS norm is exact, ``||f||_k^2 = c^T k(Z, Z) c``, so synthetic objectives
can be rescaled to a prescribed norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, InputError
from .kernels import KernelSpec, as_points, kernel_matrix
from .qmc import grid_side
from .rng import OBJECTIVE, as_generator, stream

MAX_RETRIES = 5
GRID_BUDGET = 2**24
_CHUNK = 1 << 16

# c^T K c below this fraction of |c|^2 means c sits in the Gram's numerical null space
_DEGENERATE_RATIO = 1e-10


@dataclass(frozen=True, eq=False)
class RKHSFunction:
    spec: KernelSpec
    centers: np.ndarray
    coeffs: np.ndarray
    seed: int | None = None
    x0: np.ndarray | None = field(default=None)
    value0: float | None = None
    x0_tolerance: float | None = None

    @property
    def d(self):
        return self.centers.shape[1]

    @property
    def norm_sq(self):
        K = kernel_matrix(self.spec, self.centers)
        return max(float(self.coeffs @ K @ self.coeffs), 0.0)

    @property
    def norm(self):
        return math.sqrt(self.norm_sq)

    def __call__(self, X):
        return evaluate_objective(self, X)

    def with_maximum(self, resolution=2048, passes=3):
        x0, value0, tol = locate_maximum(self, resolution, passes)
        return RKHSFunction(self.spec, self.centers, self.coeffs, self.seed, x0, value0, tol)

    def scaled(self, factor):
        return RKHSFunction(self.spec, self.centers, self.coeffs * factor, self.seed)

    def reflected(self):
        """The mirror image ``x -> f(1 - x)``."""
        return RKHSFunction(self.spec, 1.0 - self.centers, self.coeffs.copy(), self.seed)

    def to_dict(self):
        return {
            "kernel": self.spec.to_dict(),
            "centers": self.centers.tolist(),
            "coeffs": self.coeffs.tolist(),
            "norm": self.norm,
            "x0": None if self.x0 is None else self.x0.tolist(),
            "value0": self.value0,
            "x0_tolerance": self.x0_tolerance,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        x0 = data.get("x0")
        return cls(
            KernelSpec.from_dict(data["kernel"]),
            np.asarray(data["centers"], dtype=float),
            np.asarray(data["coeffs"], dtype=float),
            data.get("seed"),
            None if x0 is None else np.asarray(x0, dtype=float),
            data.get("value0"),
            data.get("x0_tolerance"),
        )


def objective_from_coefficients(spec, centers, coeffs, target_norm=None, seed=None):
    """Objective from explicit centers and coefficients, optionally rescaled."""
    Z = as_points(centers)
    c = np.asarray(coeffs, dtype=float).reshape(-1)
    if c.shape[0] != Z.shape[0]:
        raise InputError("one coefficient per center required")
    if not np.any(c):
        raise InputError("all coefficients are zero; the objective is identically 0")
    f = RKHSFunction(spec, Z, c, seed)
    if target_norm is None:
        return f
    if not target_norm > 0:
        raise InputError(f"target_norm must be > 0, got {target_norm}")
    nsq = f.norm_sq
    if nsq <= _DEGENERATE_RATIO * float(c @ c):
        raise InputError("coefficients lie in the numerical null space of k(Z, Z)")
    return f.scaled(target_norm / math.sqrt(nsq))


def synthesize_objective(spec, n, seed, target_norm=2.0, d=1):
    """Random expansion with ``n`` uniform centers and ``||f||_k = target_norm``.

    Centers are redrawn (up to 5 times) when the coefficient draw lies in the
    numerical null space of the center Gram.
    """
    if n < 1:
        raise ConfigError(f"need at least one center, got {n}")
    if not target_norm > 0:
        raise ConfigError(f"target_norm must be > 0, got {target_norm}")
    spec.check_dimension(d)
    rng = stream(seed, OBJECTIVE)
    for _ in range(MAX_RETRIES + 1):
        Z = rng.random((n, d))
        c = rng.standard_normal(n)
        try:
            return objective_from_coefficients(spec, Z, c, target_norm, seed)
        except InputError:
            continue
    raise ConfigError(
        f"center Gram numerically singular after {MAX_RETRIES} resamples; "
        "reduce n or the kernel length-scale"
    )


def evaluate_objective(f, X):
    """``f(X)`` for a point set; a single ``d``-vector gives a scalar."""
    single = np.ndim(X) == 1 and f.d > 1 and np.shape(X)[0] == f.d
    pts = as_points(np.reshape(X, (1, -1)) if single else X, f.d)
    vals = kernel_matrix(f.spec, pts, f.centers) @ f.coeffs
    if single or np.ndim(X) == 0:
        return float(vals[0])
    return vals


def observe_noisy(f, x, lam, rng=None):
    """Noisy evaluation ``f(x) + eta`` with ``eta ~ N(0, lam)``."""
    if lam < 0:
        raise InputError(f"noise variance must be >= 0, got {lam}")
    value = evaluate_objective(f, x)
    gen = as_generator(rng)
    noise = gen.standard_normal(np.shape(value)) * math.sqrt(lam)
    return value + noise if np.ndim(value) else float(value + noise)


def _grid_max(f, resolution):
    d = f.d
    axis = np.linspace(0.0, 1.0, resolution)
    total = resolution**d
    best_val, best_idx = -np.inf, 0
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total))
        pts = np.stack([axis[k] for k in np.unravel_index(idx, (resolution,) * d)], axis=1)
        vals = evaluate_objective(f, pts)
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val, best_idx = float(vals[j]), int(idx[j])
    x = np.array([axis[k] for k in np.unravel_index(best_idx, (resolution,) * d)])
    return x, best_val


def locate_maximum(f, resolution=2048, passes=3):
    """Grid search then coordinate-wise refinement.

    After the grid, each pass runs a bounded 1-D search along every coordinate
    inside ``[x_i - h, x_i + h]`` and then halves ``h`` (starting at one grid
    spacing). A move is kept only if it does not lower the value, so the result
    is never worse than the best grid point. Returns ``(x0, value0, h_final)``
    where ``h_final`` bounds how far the refinement could still move.
    """
    if resolution < 10:
        raise ConfigError(f"resolution must be >= 10 points per dimension, got {resolution}")
    grid_side(resolution, f.d, GRID_BUDGET)
    x, best = _grid_max(f, resolution)
    h = 1.0 / (resolution - 1)
    for _ in range(passes):
        for i in range(f.d):
            lo, hi = max(x[i] - h, 0.0), min(x[i] + h, 1.0)

            def neg(s, i=i):
                probe = x.copy()
                probe[i] = s
                return -evaluate_objective(f, probe[None, :])[0]

            res = minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-13, "maxiter": 200})
            if -res.fun >= best:
                x[i] = float(res.x)
                best = float(-res.fun)
        h *= 0.5
    return x, best, h
