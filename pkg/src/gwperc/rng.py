"""Counter-based random streams.

Every random decision in the package is a pure function of a 64-bit key, so
results never depend on evaluation order, thread count, or how far a tree has
been expanded.  The mixing function is the splitmix64 output stage; the
compiled kernels and the pure-Python fallback implement the exact same
arithmetic, which the test-suite checks bit for bit.

Key layout
----------
* tree vertices: the root key is ``derive_key(master_seed, "tree", 0)`` and the
  ``i``-th child of a vertex with key ``k`` has key ``mix64(k ^ child_salt(i))``.
* offspring count of a vertex: inverse-CDF lookup of ``unit(mix64(k ^ SALT_OFFSPRING))``.
* percolation: the edge into vertex ``k`` is open under replicate key ``p`` iff
  ``unit(mix64(p ^ k)) < p_c``.
* auxiliary uniforms (spine choices): ``stream_unit(key, counter)``.
"""

from __future__ import annotations

import hashlib
from bisect import bisect_right

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

SALT_OFFSPRING = 0x6A09E667F3BCC908
SALT_CHILD = 0xBB67AE8584CAA73B
SALT_STREAM = 0x3C6EF372FE94F82B

_INV_2_53 = 2.0**-53


def mix64(x: int) -> int:
    z = (int(x) + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorised :func:`mix64` over a ``uint64`` array (wrapping arithmetic)."""
    z = np.asarray(x, dtype=np.uint64) + np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def unit(h: int) -> float:
    """Map a 64-bit hash to a double in [0, 1) using its top 53 bits."""
    return (h >> 11) * _INV_2_53


def unit_array(h: np.ndarray) -> np.ndarray:
    return (h >> np.uint64(11)).astype(np.float64) * _INV_2_53


def tag_hash(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")


def _stream_base(seed: int, tag: str) -> int:
    return mix64(mix64(seed & MASK64) ^ tag_hash(tag))


def derive_key(seed: int, tag: str, index: int = 0) -> int:
    """Key of stream ``(seed, tag, index)``."""
    return mix64((_stream_base(seed, tag) + index) & MASK64)


def derive_keys(seed: int, tag: str, start: int, count: int) -> np.ndarray:
    """Keys of streams ``(seed, tag, start) ... (seed, tag, start + count - 1)``."""
    base = np.uint64((_stream_base(seed, tag) + start) & MASK64)
    return mix64_array(base + np.arange(count, dtype=np.uint64))


def child_salts(count: int) -> np.ndarray:
    return mix64_array(np.uint64(SALT_CHILD) + np.arange(count, dtype=np.uint64))


def child_key(key: int, i: int) -> int:
    return mix64(key ^ mix64((SALT_CHILD + i) & MASK64))


def offspring_uniform(key: int) -> float:
    return unit(mix64(key ^ SALT_OFFSPRING))


def offspring_count(key: int, cdf) -> int:
    """Offspring count of the vertex with ``key`` (``cdf[j] = P[Z <= j]``)."""
    return bisect_right(cdf, offspring_uniform(key))


def offspring_counts(keys: np.ndarray, cdf: np.ndarray) -> np.ndarray:
    u = unit_array(mix64_array(keys ^ np.uint64(SALT_OFFSPRING)))
    return np.searchsorted(cdf, u, side="right")


def edge_open(perc_key: int, key: int, pc: float) -> bool:
    return unit(mix64(perc_key ^ key)) < pc


def stream_unit(key: int, counter: int) -> float:
    return unit(mix64(key ^ mix64((SALT_STREAM + counter) & MASK64)))
