"""Counter-based random streams keyed by (seed, round, purpose).

Every random quantity in an experiment is drawn from its own Philox stream,
so the draws of round ``t`` do not depend on how many numbers earlier rounds
consumed. This keeps traces reproducible when the candidate budget changes.
"""

import numpy as np

GENERATOR_NAME = "numpy.Philox"

# stream purposes
CANDIDATES = 0
PATH = 1
NOISE = 2
OBJECTIVE = 3
NYSTROM = 4
GAMMA_POOL = 5
IDENTITY = 6


def stream(seed, *key):
    """Return an independent Philox generator for ``(seed, *key)``."""
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng):
    """Accept a Generator, an int seed, or None (seed 0)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return stream(0 if rng is None else rng)
