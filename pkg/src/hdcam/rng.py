"""Counter-based random streams.

Every random number is a pure hash of ``(seed, *counters)``, so a Monte
Carlo trial draws the same values no matter which worker runs it or in what
order. The mixer is the SplitMix64 finalizer chained over the counters.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1
_INV_2_53 = 1.0 / (1 << 53)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def hash64(seed: int, *counters) -> np.ndarray:
    """uint64 hash of a seed and any number of broadcastable counters."""
    with np.errstate(over="ignore"):
        h = _mix64(np.asarray(seed & _MASK64, dtype=np.uint64) + _GOLDEN)
        for c in counters:
            c = np.asarray(c).astype(np.uint64)
            h = _mix64((h ^ c) + _GOLDEN)
    return h


def uniform(seed: int, *counters) -> np.ndarray:
    """Floats in the open interval (0, 1), 53 bits of resolution."""
    h = hash64(seed, *counters)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53


def normal(seed: int, *counters) -> np.ndarray:
    """Standard normals via Box-Muller; each uses two hashed uniforms."""
    u1 = uniform(seed, *counters, 0)
    u2 = uniform(seed, *counters, 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


# Box-Muller with u1 >= 2**-54 bounds every draw; used for exact pruning.
NORMAL_BOUND = float(np.sqrt(-2.0 * np.log(0.5 * _INV_2_53)))
