"""Counter-based random numbers.

Every random quantity in the pipeline is a pure function of integer keys
(seed, traversal, frame, pixel, field tag, ...), so results never depend on
evaluation order or thread scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def tag(name: str) -> int:
    """Stable 64-bit key for a string label."""
    return int.from_bytes(hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest(), "little")


def hash64(*keys) -> np.ndarray:
    """Hash keys (ints, strings, or broadcastable integer arrays) to uint64."""
    with np.errstate(over="ignore"):
        h = np.zeros((), dtype=np.uint64)
        for k in keys:
            if isinstance(k, str):
                k = tag(k)
            k = np.asarray(k)
            if k.dtype.kind in "iu" and k.dtype != np.uint64:
                k = k.astype(np.int64).astype(np.uint64)
            elif k.dtype.kind not in "iu":
                k = np.asarray(int(k) & MASK64, dtype=np.uint64)
            h = _mix(h ^ (k + _GOLDEN + (h << np.uint64(6)) + (h >> np.uint64(2))))
        return h


def uniform(*keys) -> np.ndarray:
    """Uniform doubles in [0, 1) from the top 53 bits of :func:`hash64`."""
    return (hash64(*keys) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def normal(*keys) -> np.ndarray:
    """Standard normal deviates by Box-Muller over two hashed uniforms."""
    u1 = uniform(*keys, 1)
    u2 = uniform(*keys, 2)
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


def poisson(mean: float, *keys) -> int:
    """Poisson count by CDF inversion of one hashed uniform."""
    if mean <= 0:
        return 0
    u = float(uniform(*keys))
    k, p = 0, np.exp(-mean)
    cdf = p
    while u > cdf and k < 10_000:
        k += 1
        p *= mean / k
        cdf += p
    return k
