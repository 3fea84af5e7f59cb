"""Thompson-sampling draws over a finite candidate set.

The argmax over the continuum is realized over ``m`` candidates. In experiments
a fresh scrambled-Sobol set is generated every round, keyed by the round index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError, NumericalError
from .kernels import as_points
from .posterior import Prediction, jitter_levels, predict
from .qmc import regular_grid, scrambled_sobol
from .rng import as_generator

GENERATORS = ("grid", "sobol")
DEFAULT_M_MAX = 16384


@dataclass(frozen=True)
class CandidateSet:
    points: np.ndarray
    generator: str
    seed: int | None = None

    def __len__(self):
        return self.points.shape[0]


def generate_candidates(d, m, generator="sobol", seed=0, m_max=DEFAULT_M_MAX):
    """Deterministic candidate set of ``m`` distinct points in ``[0, 1]^d``."""
    if m < 1:
        raise ConfigError(f"candidate count must be >= 1, got {m}")
    if m > m_max:
        raise ConfigError(
            f"{m} candidates exceed the budget m_max={m_max} "
            "(an m x m covariance is factored every round)"
        )
    if generator == "grid":
        pts = regular_grid(d, m)
    elif generator == "sobol":
        pts = scrambled_sobol(d, m, seed)
    else:
        raise ConfigError(f"unknown candidate generator {generator!r}; use one of {GENERATORS}")
    return CandidateSet(pts, generator, seed if isinstance(seed, (int, np.integer)) else None)


@dataclass(frozen=True)
class PathDraw:
    """A sampled path together with the moments it was drawn from."""

    values: np.ndarray
    moments: Prediction
    normals: np.ndarray


def _candidate_points(C):
    return C.points if isinstance(C, CandidateSet) else as_points(C)


def _cov_factor(cov):
    scale = float(np.max(np.diag(cov))) if cov.size else 0.0
    if not scale > 0:
        # every candidate variance collapsed; the path is the mean
        return np.zeros_like(cov)
    eye = np.eye(cov.shape[0])
    for level in jitter_levels():
        try:
            return np.linalg.cholesky(cov + level * scale * eye)
        except np.linalg.LinAlgError:
            continue
    raise NumericalError("candidate covariance not factorizable with jitter up to 1e-6")


def draw_path(state, C, rng=None, normals=None):
    """Sample ``theta ~ N(mu(C), alpha^{-1} k(C, C))`` and keep the moments.

    The untempered covariance is factored and the deviation scaled by
    ``alpha^{-1/2}``, so paths for different tempers sharing ``normals``
    differ only by that scale.
    """
    pts = _candidate_points(C)
    if pts.shape[0] == 0:
        raise InputError("empty candidate set")
    moments = predict(state, pts)
    if normals is None:
        normals = as_generator(rng).standard_normal(pts.shape[0])
    else:
        normals = np.asarray(normals, dtype=float)
        if normals.shape != (pts.shape[0],):
            raise InputError(f"normals must have shape ({pts.shape[0]},)")
    factor = _cov_factor(moments.cov)
    values = moments.mean + (factor @ normals) / math.sqrt(state.alpha)
    return PathDraw(values, moments, normals)


def sample_path(state, C, rng=None, normals=None):
    """One posterior sample path evaluated on the candidate set."""
    return draw_path(state, C, rng, normals).values


def select_argmax(values, C):
    """Index and point of the largest value; ties go to the lowest index."""
    values = np.asarray(values, dtype=float)
    pts = _candidate_points(C)
    if values.size == 0 or pts.shape[0] == 0:
        raise InputError("cannot select from an empty candidate set")
    if values.shape != (pts.shape[0],):
        raise InputError("one value per candidate required")
    if not np.all(np.isfinite(values)):
        raise InputError("sampled values must be finite")
    idx = int(np.argmax(values))
    return idx, pts[idx].copy()
