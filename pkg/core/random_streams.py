"""
Random Streams - reproducible, parallel-safe random number generation
Seeds are mixed with a SplitMix64 avalanche and fed as the key of a
counter-based Philox generator, so every stream is platform independent
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(value):
    """One SplitMix64 output step for a 64-bit state (bijective on 64 bits)"""
    z = (value + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix_seed(master, *parts):
    """
    Derive a child seed from a master seed and any number of integer parts

    mix_seed(master, n, r) gives the per-replication seed of a study;
    mix_seed(seed, k, start_index) the per-start seed of a fit
    """
    state = splitmix64(int(master) & MASK64)
    for part in parts:
        state = splitmix64(state ^ (int(part) & MASK64))
    return state


def make_stream(seed):
    """Generator over Philox keyed directly by the 64-bit seed"""
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))
