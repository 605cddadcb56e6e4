"""Portable counter-based random streams (splitmix64).

Scene noise and training-set sampling draw from these streams instead of
a stateful generator so that (a) the same seed reproduces bit-identical
values on any platform and (b) a value depends only on (seed, counter),
never on traversal order.  Stream k of a seed is the splitmix64 output
for state ``seed + (k + 1) * GOLDEN``.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = 0xFFFFFFFFFFFFFFFF


def mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer applied elementwise to uint64 values."""
    z = x.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= _MIX1
    z ^= z >> np.uint64(27)
    z *= _MIX2
    z ^= z >> np.uint64(31)
    return z


def derive_seed(seed: int, *words: int) -> int:
    """Fold extra words into a seed, giving independent sub-streams."""
    out = seed & _MASK64
    golden = int(_GOLDEN)
    for w in words:
        state = (out + ((w & _MASK64) + 1) * golden) & _MASK64
        out = int(mix64(np.array([state], dtype=np.uint64))[0])
    return out


def uniform_stream(seed: int, counters) -> np.ndarray:
    """Doubles in (0, 1], one per counter."""
    c = np.asarray(counters, dtype=np.uint64)
    x = mix64(np.uint64(seed & _MASK64) + (c + np.uint64(1)) * _GOLDEN)
    # 53 significant bits; +1 keeps the value strictly positive for log().
    return ((x >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def normal_stream(seed: int, counters) -> np.ndarray:
    """Standard normals, one per counter (Box-Muller over counters 2k, 2k+1)."""
    c = np.asarray(counters, dtype=np.uint64)
    two = np.uint64(2)
    u1 = uniform_stream(seed, c * two)
    u2 = uniform_stream(seed, c * two + np.uint64(1))
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
