"""Seed derivation and counter-based sample hashing.

Every random decision in the pipeline flows from a 64-bit seed through one of
two routes: numpy PCG64 generators for plan/config sampling, and a vectorized
SplitMix64 counter hash for per-pixel render jitter (backend-exact: plain
uint64 array arithmetic, identical under numba and pure numpy).
"""

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """SplitMix64 finalizer on a 64-bit word (Python ints, masked)."""
    x = (x + _GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, *words) -> int:
    """Derive a child seed from a parent seed and an index/tag path.

    String tags are folded in bytewise so call sites can salt streams by
    purpose ("config", "frame", ...) without colliding with integer indices.
    """
    h = seed & MASK64
    for w in words:
        if isinstance(w, str):
            for b in w.encode("utf-8"):
                h = mix64(h ^ b)
        else:
            h = mix64(h ^ (int(w) & MASK64))
    return h


def generator(seed: int, *words) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *words)))


def counter_hash(seed: int, count: int) -> np.ndarray:
    """`count` hashed uint64 words from counter mode SplitMix64."""
    idx = np.arange(1, count + 1, dtype=np.uint64)
    x = np.uint64(seed & MASK64) + idx * np.uint64(_GOLDEN)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(_MIX1)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(_MIX2)
    return x ^ (x >> np.uint64(31))


def counter_floats(seed: int, count: int) -> np.ndarray:
    """`count` floats in [0, 1) derived from counter_hash (53-bit mantissas)."""
    return (counter_hash(seed, count) >> np.uint64(11)).astype(np.float64) * (
        1.0 / (1 << 53)
    )
