"""Deterministic, counter-based randomness.

Two layers serve different needs:

* ``counter_hash``: a splitmix64 finalizer evaluated at explicit counters.
  Each output word is a pure function of (key, counter), so bit generation
  and probabilistic merges are reproducible regardless of iteration order
  or how work is partitioned.
* ``philox_stream``: keyed numpy Philox generators for bulk simulator draws
  (Gaussian matrices, per-step drift increments, per-frame read noise).
  Streams are keyed, never split sequentially, so regenerating the same
  keyed stream is bit-identical.

String key components are folded in via BLAKE2b so labels of any length
mix uniformly.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """splitmix64 finalizer on a python int, reduced mod 2**64."""
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _component_to_u64(part: int | str) -> int:
    if isinstance(part, str):
        return int.from_bytes(
            hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest(), "little"
        )
    return part & _MASK64


def derive_key(seed: int, *parts: int | str) -> int:
    """Fold (seed, parts...) into one 64-bit key.

    Distinct part sequences give independent keys; strings and ints are
    both accepted so per-label streams can be derived directly.
    """
    key = mix64(seed)
    for part in parts:
        key = mix64((key + _GOLDEN) ^ _component_to_u64(part))
    return key


def counter_hash(key: int, counters: np.ndarray) -> np.ndarray:
    """splitmix64 words at the given counters: pure function of (key, counter)."""
    z = (counters.astype(np.uint64) + np.uint64(1)) * np.uint64(_GOLDEN)
    z += np.uint64(key & _MASK64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def key_words(key: int, n: int, start: int = 0) -> np.ndarray:
    """n consecutive keyed words, counters start..start+n-1."""
    return counter_hash(key, np.arange(start, start + n, dtype=np.uint64))


def permutation(key: int, n: int) -> np.ndarray:
    """Deterministic permutation of range(n): argsort of keyed words."""
    return np.argsort(key_words(key, n), kind="stable")


def philox_stream(key: int) -> np.random.Generator:
    """Keyed Philox generator; same key always yields the same stream."""
    k = np.array([key & _MASK64, mix64(key + _GOLDEN)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=k))
