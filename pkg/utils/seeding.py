"""
Counter-based seed splitting.

Every sample in a scenario gets its own generator derived from
``(seed, index)``, so results do not depend on evaluation order or on the
number of worker threads.
"""

from typing import List

import numpy as np


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Return the generator owned by sample ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def stream_rng(seed: int, stream: str) -> np.random.Generator:
    """Return a generator for a named auxiliary stream (node layouts, offsets)."""
    key = [int(b) for b in stream.encode("utf-8")]
    return np.random.default_rng(np.random.SeedSequence([int(seed), 2**31 - 1] + key))


def spawn_seeds(seed: int, count: int) -> List[int]:
    """Integer seeds of the first ``count`` samples, recorded for provenance."""
    return [int(np.random.SeedSequence([int(seed), i]).generate_state(1)[0])
            for i in range(count)]
