"""Counter-based random streams.

Every random draw in the package flows from a ``numpy.random.Philox``
generator keyed by a ``SeedSequence`` built from integer coordinates
(master seed, cell index, trial index, ...).  Results therefore do not
depend on how work is scheduled across threads.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _entropy(seed) -> list[int]:
    if isinstance(seed, np.random.SeedSequence):
        return list(np.atleast_1d(seed.entropy)) + list(seed.spawn_key)
    if isinstance(seed, (tuple, list)):
        return [int(s) & _MASK64 for s in seed]
    return [int(seed) & _MASK64]


def make_rng(seed) -> np.random.Generator:
    """Return a Philox-backed generator for an integer or tuple seed."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(_entropy(seed))))


def trial_seed(master: int, *indices: int) -> int:
    """Derive a 64-bit seed from a master seed and integer coordinates.

    The mapping is a hash (via ``SeedSequence``) so neighbouring
    coordinates give unrelated streams.
    """
    ss = np.random.SeedSequence([int(master) & _MASK64, *(int(i) & _MASK64 for i in indices)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def spawn_streams(seed: int, count: int) -> list[np.random.Generator]:
    """Split one seed into ``count`` independent Philox generators."""
    children = np.random.SeedSequence(_entropy(seed)).spawn(count)
    return [np.random.Generator(np.random.Philox(c)) for c in children]
