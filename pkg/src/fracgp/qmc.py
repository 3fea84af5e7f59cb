"""Point sets on the unit cube: scrambled Sobol sequences and regular grids."""

import math
import warnings

import numpy as np
from scipy.stats import qmc as _qmc

from .errors import ConfigError
from .rng import as_generator


def scrambled_sobol(d, m, seed=0):
    """First ``m`` points of an Owen-scrambled Sobol sequence in ``[0, 1]^d``.

    ``seed`` may be an int or a ``numpy.random.Generator``; the scrambling is
    a deterministic function of it.
    """
    if m < 1 or d < 1:
        raise ConfigError(f"need d >= 1 and m >= 1, got d={d}, m={m}")
    engine = _qmc.Sobol(d, scramble=True, seed=as_generator(seed))
    with warnings.catch_warnings():
        # balance warning for non power-of-two m is irrelevant here
        warnings.simplefilter("ignore", UserWarning)
        return engine.random(m)


def regular_grid(d, m):
    """Tensor grid with ``m`` points, endpoints included.

    For ``d > 1`` the count must be a perfect ``d``-th power.
    """
    if d == 1:
        return np.linspace(0.0, 1.0, m)[:, None]
    side = round(m ** (1.0 / d))
    if side**d != m:
        raise ConfigError(f"grid with d={d} needs m to be a d-th power, got {m}")
    axes = [np.linspace(0.0, 1.0, side)] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def grid_side(resolution, d, budget):
    """Validate a dense-grid request of ``resolution`` points per axis."""
    total = float(resolution) ** d
    if total > budget:
        raise ConfigError(
            f"dense grid of {resolution}^{d} = {total:.3g} points exceeds the "
            f"budget of {budget}; lower the resolution"
        )
    return int(resolution)


def is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


def powers_of_two(upto):
    return [2**k for k in range(int(math.log2(upto)) + 1)]
