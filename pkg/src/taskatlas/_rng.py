"""Counter-style seeded generators: one generator per (master seed, index path).

Every randomized operation derives its generator from the master seed plus a
fixed index path (tree number, bootstrap replicate, stratum, ...), so results
never depend on scheduling or worker counts.
"""

from __future__ import annotations

import numpy as np


def rng_for(seed: int, *path: int) -> np.random.Generator:
    """Deterministic generator keyed by (seed, *path)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path)))
