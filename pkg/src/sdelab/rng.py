"""Counter-based random streams.

Every consumer of randomness derives a Philox generator from a structured
key (seed, role, block, ...). Streams are independent across keys and the
draw sequence within a key is fixed, so results do not depend on how work
is sharded across threads.
"""

from __future__ import annotations

import numpy as np

# Stream roles. Keeping these distinct means e.g. corrector draws never
# disturb predictor draws, so EM and PC with snr=0 share trajectories.
ROLE_INIT = 1
ROLE_PREDICTOR = 2
ROLE_CORRECTOR = 3
ROLE_SCORE_NOISE = 4
ROLE_DATA = 5
ROLE_LOSS = 6
ROLE_BOOTSTRAP = 7

# Paths are processed in fixed-size blocks; the block, not the thread, is
# the unit of stream derivation.
BLOCK_SIZE = 8192


def stream(*key: int) -> np.random.Generator:
    """Generator for a structured integer key, independent across keys."""
    squashed = tuple(int(k) & 0xFFFFFFFFFFFFFFFF for k in key)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(squashed)))


def block_slices(n: int, block_size: int = BLOCK_SIZE):
    """Split range(n) into contiguous blocks of at most block_size."""
    return [(lo, min(lo + block_size, n)) for lo in range(0, n, block_size)]
