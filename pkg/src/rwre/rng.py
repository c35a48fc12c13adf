"""Counter-based deterministic random bits.

Everything stochastic in this package is a pure function of integer words
(seed, replica index, lattice site, step number, ...).  We hash the words
down to 64 bits with a SplitMix64-style chain and turn the result into a
uniform in [0, 1).  No generator state is ever carried around, so results
are independent of evaluation order, batching and thread count, and a
revisited lattice site always sees the same transition vector.

The scalar and vectorized paths share the same arithmetic (numpy uint64,
wrapping semantics), so a single site hashed alone equals the same site
hashed inside a batch, bit for bit.
"""

from __future__ import annotations

import numpy as np

# SplitMix64 constants (Steele, Lea, Flood 2014).
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

_U53_INV = float(2.0**-53)


def mix64(h):
    """SplitMix64 finalizer: full-avalanche 64-bit permutation.

    Accepts and returns np.uint64 scalars or arrays.
    """
    h = np.uint64(h) if not isinstance(h, np.ndarray) else h
    with np.errstate(over="ignore"):  # wrapping is the point
        h ^= h >> np.uint64(30)
        h *= _MIX1
        h ^= h >> np.uint64(27)
        h *= _MIX2
        h ^= h >> np.uint64(31)
    return h


def _as_u64(w):
    """Coerce an int / int array to uint64 with two's-complement wrapping."""
    if isinstance(w, np.ndarray):
        return w.astype(np.int64).view(np.uint64) if w.dtype != np.uint64 else w
    return np.uint64(int(w) & 0xFFFFFFFFFFFFFFFF)


def hash_words(seed, *words):
    """Hash (seed, w0, w1, ...) to 64 bits.

    Words may be python ints, numpy integer scalars or arrays (all arrays
    broadcast together).  Negative values are folded in via two's
    complement, so lattice coordinates can be used directly.
    """
    with np.errstate(over="ignore"):
        h = mix64(_as_u64(seed) + _GAMMA)
        for w in words:
            h = mix64((h + _GAMMA) ^ _as_u64(w))
    return h


def u01(bits):
    """Map 64 random bits to a float64 uniform in [0, 1) using 53 bits."""
    return (bits >> np.uint64(11)).astype(np.float64) * _U53_INV if isinstance(
        bits, np.ndarray
    ) else float(int(bits) >> 11) * _U53_INV


def uniform(seed, *words):
    """One-call uniform in [0, 1) from integer words."""
    return u01(hash_words(seed, *words))


def derive(seed, tag: int) -> int:
    """Derive an independent 64-bit stream key from (seed, tag)."""
    return int(hash_words(seed, tag))
