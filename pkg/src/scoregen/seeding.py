"""Named random sub-streams derived from one integer seed."""

import numpy as np

STREAMS = {"init": 0, "dropout": 1, "shuffle": 2, "seed-selection": 3}


def rng_stream(seed, name):
    """Independent generator for ``name``; equal (seed, name) gives equal draws."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), STREAMS[name]]))
