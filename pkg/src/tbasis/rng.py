"""Portable seeded normal generator (generator version 1).

The stream is counter based: the k-th 64-bit word for key ``s`` is
``splitmix64(s + (k + 1) * 0x9E3779B97F4A7C15)``. Pairs of words become two
standard normals through the Box-Muller transform::

    u1 = ((w0 >> 11) + 1) * 2**-53        # in (0, 1]
    u2 = (w1 >> 11) * 2**-53              # in [0, 1)
    z0 = sqrt(-2 ln u1) * cos(2 pi u2)
    z1 = sqrt(-2 ln u1) * sin(2 pi u2)

Because a prng-mode basis is stored only as (B, R, N, seed), this algorithm
is part of the TBM1 file contract; bump ``GENERATOR_VERSION`` on any change.
"""

from __future__ import annotations

import hashlib

import numpy as np

GENERATOR_VERSION = 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def splitmix64(key: int, count: int) -> np.ndarray:
    """First ``count`` words of the counter stream for ``key``."""
    with np.errstate(over="ignore"):
        k = np.arange(1, count + 1, dtype=np.uint64)
        z = np.uint64(key & _MASK64) + k * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def standard_normal(key: int, count: int) -> np.ndarray:
    pairs = (count + 1) // 2
    words = splitmix64(key, 2 * pairs)
    scale = 2.0 ** -53
    u1 = ((words[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * scale
    u2 = (words[1::2] >> np.uint64(11)).astype(np.float64) * scale
    radius = np.sqrt(-2.0 * np.log(u1))
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(2.0 * np.pi * u2)
    out[1::2] = radius * np.sin(2.0 * np.pi * u2)
    return out[:count]


def normal(key: int, shape, std: float = 1.0) -> np.ndarray:
    shape = tuple(shape) if np.iterable(shape) else (int(shape),)
    count = int(np.prod(shape, dtype=np.int64))
    return std * standard_normal(key, count).reshape(shape)


def derive_seed(seed: int, purpose: str) -> int:
    """Sub-seed for ``purpose`` derived by hashing ``(seed, purpose)``."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed & _MASK64).to_bytes(8, "little"))
    h.update(purpose.encode("utf-8"))
    return int.from_bytes(h.digest(), "little")
