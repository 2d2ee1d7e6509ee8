"""Counter-based random streams.

Every stream is a NumPy ``Philox4x32-10`` generator keyed by a
``SeedSequence``. Stream ``i`` of a run with seed ``s`` is keyed by
``SeedSequence(s, spawn_key=(i,))`` (sweeps over several sample sizes use
``spawn_key=(j, i)`` for the ``j``-th size), so a replicate's draws depend only on
``(s, i)``: never on which worker ran it or how replicates were sharded.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def _check_seed(seed: int) -> int:
    if isinstance(seed, bool) or int(seed) != seed:
        raise ValidationError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValidationError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(_check_seed(seed))))


def stream(seed: int, *index: int) -> np.random.Generator:
    """Independent generator at position ``index`` (one or more ints) split off ``seed``."""
    ss = np.random.SeedSequence(_check_seed(seed), spawn_key=tuple(int(i) for i in index))
    return np.random.Generator(np.random.Philox(ss))
