"""Counter-based random stream derivation.

One master seed deterministically derives an independent Philox stream
per purpose: one for particle initialization, one per iteration of the
run loop. Within an iteration the noise matrix is materialized up front
with one row per particle, so row i is a fixed function of
(seed, iteration, particle index) and results do not depend on whether
particle updates are later evaluated serially or in parallel.
"""

import numpy as np

_INIT_KEY = 0
_STEP_KEY = 1
_DATA_KEY = 2


def _generator(seed, spawn_key):
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(ss))


def init_generator(seed):
    """Stream used to draw initial particle positions."""
    return _generator(seed, (_INIT_KEY,))


def step_generator(seed, iteration):
    """Stream used for batch and noise draws of one iteration."""
    if iteration < 0:
        raise ValueError(f"iteration must be >= 0, got {iteration}")
    return _generator(seed, (_STEP_KEY, int(iteration)))


def data_generator(seed):
    """Stream used to synthesize data sets for built-in experiments."""
    return _generator(seed, (_DATA_KEY,))
