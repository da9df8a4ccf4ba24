"""Deterministic seed derivation and shuffling.

Every source of randomness in a run is derived from the single config seed
through splitmix64 mixing, so independent implementations can reproduce the
exact stream:

    stream 0          -> model parameter initialization
    stream 1 + epoch  -> training-data permutation for that epoch

Epoch permutations are produced by a Fisher-Yates shuffle driven directly by
successive splitmix64 outputs (index ``j = next() % (i + 1)``), which keeps
the permutation reproducible without depending on any RNG library internals.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

INIT_STREAM = 0
# Dataset synthesis gets a stream far above any plausible epoch index so it
# never collides with the per-epoch shuffle streams (1 + epoch).
DATA_STREAM = 1 << 32


def splitmix64(state: int) -> int:
    """One splitmix64 step: returns the output for the given state."""
    z = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix_seed(seed: int, stream: int) -> int:
    """Mix (seed, stream) into one 64-bit value; distinct streams decorrelate."""
    return splitmix64(splitmix64(seed & _MASK64) ^ splitmix64(stream & _MASK64))


def shuffle_stream(epoch: int) -> int:
    return 1 + epoch


def epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    """Training-data order for one epoch, as an index permutation of length n."""
    if n <= 0:
        raise ValueError(f"permutation length must be positive, got {n}")
    state = mix_seed(seed, shuffle_stream(epoch))
    perm = np.arange(n, dtype=np.int64)
    for i in range(n - 1, 0, -1):
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        j = (z ^ (z >> 31)) % (i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def init_rng(seed: int) -> np.random.Generator:
    """Generator used for model parameter initialization."""
    return np.random.Generator(np.random.PCG64(mix_seed(seed, INIT_STREAM)))
