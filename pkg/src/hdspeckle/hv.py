"""Binary hypervector algebra on bit-packed 64-bit words.

Layout: dimension index i lives at bit i % 64 of word i // 64 (little-endian
word order); trailing bits of the last word are always zero, so popcounts
never see phantom dimensions. All operations are deterministic functions of
their arguments, seeds included.

Frames are encoded by exact-balance thresholding: the floor(D/2) largest
pixels map to 1, ties at the cut value resolved by ascending pixel index.
Majority bundling accumulates per-dimension '1' counts and thresholds at
half the accumulated count; an exact tie resolves to 1. The probabilistic
merge draws one uniform per dimension from a counter-based hash keyed by
(seed, dimension), so results are independent of evaluation order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .frames import SpeckleFrame
from .rng import counter_hash, derive_key, key_words

MAX_DIM = 1 << 26  # keeps accumulator memory predictable


def _n_words(dim: int) -> int:
    return (dim + 63) // 64


def _pack_bits(bits: np.ndarray) -> np.ndarray:
    """0/1 array of length D -> uint64 words in the layout above."""
    d = bits.size
    padded = np.zeros(_n_words(d) * 64, dtype=np.uint8)
    padded[:d] = bits
    packed = np.packbits(padded, bitorder="little")
    # explicit little-endian interpretation keeps the word layout portable
    return np.frombuffer(packed.tobytes(), dtype="<u8").astype(np.uint64)


def _unpack_bits(words: np.ndarray, dim: int) -> np.ndarray:
    raw = words.astype("<u8").view(np.uint8)
    return np.unpackbits(raw, bitorder="little", count=dim)


def _trailing_mask(dim: int) -> int:
    r = dim % 64
    return (1 << r) - 1 if r else (1 << 64) - 1


class Hypervector:
    """Immutable fixed-dimension binary vector, bit-packed into uint64 words."""

    __slots__ = ("dim", "words")

    def __init__(self, dim: int, words: np.ndarray):
        if dim < 1:
            raise DimensionError(f"dim must be positive, got {dim}")
        w = np.ascontiguousarray(words, dtype=np.uint64)
        if w.shape != (_n_words(dim),):
            raise DimensionError(
                f"expected {_n_words(dim)} words for dim {dim}, got shape {w.shape}"
            )
        if int(w[-1]) & ~_trailing_mask(dim) & ((1 << 64) - 1):
            raise DimensionError("trailing bits beyond dim must be zero")
        w.setflags(write=False)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "words", w)

    def __setattr__(self, name, value):
        raise AttributeError("Hypervector is immutable")

    @classmethod
    def from_bits(cls, bits: np.ndarray) -> "Hypervector":
        bits = np.asarray(bits)
        if bits.ndim != 1 or bits.size == 0:
            raise DimensionError("bits must be a nonempty 1-D array")
        return cls(bits.size, _pack_bits(bits.astype(np.uint8)))

    def to_bits(self) -> np.ndarray:
        """Unpacked 0/1 uint8 array of length dim."""
        return _unpack_bits(self.words, self.dim)

    def popcount(self) -> int:
        return int(np.bitwise_count(self.words).sum(dtype=np.int64))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Hypervector):
            return NotImplemented
        return self.dim == other.dim and bool(np.array_equal(self.words, other.words))

    __hash__ = None

    def __repr__(self) -> str:
        return f"Hypervector(dim={self.dim}, popcount={self.popcount()})"


class BinarizeMode(enum.Enum):
    EXACT_BALANCE = "exact_balance"


@dataclass(frozen=True)
class BinarizePolicy:
    """Frame-to-bits policy. Ties at the cut value always fill by ascending
    pixel index, which makes the encoding a deterministic function of the
    frame alone."""

    mode: BinarizeMode = BinarizeMode.EXACT_BALANCE
    tie_order: str = "ascending_index"

    def __post_init__(self):
        if self.mode is not BinarizeMode.EXACT_BALANCE:
            raise ConfigError(f"unsupported binarize mode: {self.mode}")
        if self.tie_order != "ascending_index":
            raise ConfigError(f"unsupported tie order: {self.tie_order}")


DEFAULT_POLICY = BinarizePolicy()


def binarize_frame(
    frame: SpeckleFrame,
    policy: BinarizePolicy = DEFAULT_POLICY,
    max_dim: int = MAX_DIM,
) -> Hypervector:
    """Encode a frame as a balanced hypervector: popcount == floor(D/2) always."""
    d = frame.pixel_count
    if d < 2:
        raise DimensionError(f"frame needs at least 2 pixels, got {d}")
    if d > max_dim:
        raise DimensionError(f"frame dimension {d} exceeds maximum {max_dim}")
    flat = frame.flat()
    k = d // 2
    # cut value = k-th largest; strictly larger pixels are 1, remaining slots
    # fill from the tied pixels in ascending index order
    cut = np.partition(flat, d - k)[d - k]
    bits = flat > cut
    need = k - int(bits.sum(dtype=np.int64))
    if need:
        bits = bits.copy()
        bits[np.flatnonzero(flat == cut)[:need]] = True
    return Hypervector(d, _pack_bits(bits.astype(np.uint8)))


def hamming(a: Hypervector, b: Hypervector) -> int:
    """Count of differing dimensions (word-wise XOR + popcount)."""
    _check_dims(a, b)
    return int(np.bitwise_count(a.words ^ b.words).sum(dtype=np.int64))


def normalized_hamming(a: Hypervector, b: Hypervector) -> float:
    return hamming(a, b) / a.dim


def complement(a: Hypervector) -> Hypervector:
    w = ~a.words
    w[-1] &= np.uint64(_trailing_mask(a.dim))
    return Hypervector(a.dim, w)


def random_hypervector(dim: int, seed: int) -> Hypervector:
    """i.i.d. Bernoulli(0.5) bits; pure function of (dim, seed)."""
    if dim < 1:
        raise DimensionError(f"dim must be positive, got {dim}")
    w = key_words(derive_key(seed, "hv-bits"), _n_words(dim))
    w[-1] &= np.uint64(_trailing_mask(dim))
    return Hypervector(dim, w)


class BundleAccumulator:
    """Per-dimension '1' counters for incremental point-wise addition.

    Mutable, single-writer; everything else in this module is an immutable
    value.
    """

    __slots__ = ("dim", "counts", "n_added")

    def __init__(self, dim: int, counts: np.ndarray | None = None, n_added: int = 0):
        if dim < 1:
            raise DimensionError(f"dim must be positive, got {dim}")
        if counts is None:
            counts = np.zeros(dim, dtype=np.uint32)
        else:
            counts = np.ascontiguousarray(counts, dtype=np.uint32)
            if counts.shape != (dim,):
                raise DimensionError(f"counts shape {counts.shape} != ({dim},)")
            if n_added < int(counts.max(initial=0)):
                raise ConfigError("counts exceed n_added")
        self.dim = dim
        self.counts = counts
        self.n_added = n_added

    def add(self, hv: Hypervector) -> "BundleAccumulator":
        if hv.dim != self.dim:
            raise DimensionError(f"accumulator dim {self.dim} != hypervector dim {hv.dim}")
        self.counts += hv.to_bits()
        self.n_added += 1
        return self

    def copy(self) -> "BundleAccumulator":
        return BundleAccumulator(self.dim, self.counts.copy(), self.n_added)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BundleAccumulator):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.n_added == other.n_added
            and bool(np.array_equal(self.counts, other.counts))
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"BundleAccumulator(dim={self.dim}, n_added={self.n_added})"


def accumulate(acc: BundleAccumulator, hv: Hypervector) -> BundleAccumulator:
    """Point-wise add one hypervector into the accumulator (mutates acc)."""
    return acc.add(hv)


def finalize_majority(acc: BundleAccumulator) -> Hypervector:
    """Majority rule: bit = 1 iff counts > n/2; exact tie resolves to 1."""
    if acc.n_added < 1:
        raise ConfigError("cannot finalize an empty accumulator")
    bits = (acc.counts.astype(np.int64) * 2 >= acc.n_added).astype(np.uint8)
    return Hypervector(acc.dim, _pack_bits(bits))


def bundle(hvs: list[Hypervector]) -> Hypervector:
    """Majority bundle of a nonempty list; order-independent."""
    if not hvs:
        raise ConfigError("cannot bundle an empty list")
    acc = BundleAccumulator(hvs[0].dim)
    for hv in hvs:
        acc.add(hv)
    return finalize_majority(acc)


def merge_probabilistic(
    old: Hypervector, new: Hypervector, p: float, seed: int
) -> Hypervector:
    """Per dimension, take new with probability p, else keep old.

    One uniform per dimension from a counter hash keyed by (seed, dimension);
    the result is reproducible and independent of any processing order.
    """
    _check_dims(old, new)
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"merge probability must be in [0, 1], got {p}")
    if p == 0.0:
        return old
    if p == 1.0:
        return new
    threshold = round(p * 2.0**64)
    u = counter_hash(derive_key(seed, "merge"), np.arange(old.dim, dtype=np.uint64))
    take_new = (u < np.uint64(threshold)).astype(np.uint8)
    mask = _pack_bits(take_new)
    return Hypervector(old.dim, (old.words & ~mask) | (new.words & mask))


def _check_dims(a: Hypervector, b: Hypervector) -> None:
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} != {b.dim}")
