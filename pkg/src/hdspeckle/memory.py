"""Prototype-vector memory: train by majority bundling, classify by shortest
Hamming distance, recalibrate by probabilistic merging.

Class order is registration order (first appearance during training) and is
also the tie-break order for classification: among equidistant prototypes the
earliest-registered class wins. Per-class merge seeds are derived from
(seed, label), so recalibration commutes across disjoint label subsets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DimensionError
from .hv import (
    BundleAccumulator,
    Hypervector,
    bundle,
    finalize_majority,
    merge_probabilistic,
)
from .rng import derive_key

# chunk size for batched query-vs-prototype XOR popcounts
_EVAL_CHUNK = 64


@dataclass
class ClassEntry:
    label: str
    prototype: Hypervector
    accumulator: BundleAccumulator | None
    n_samples: int
    merged: bool = False

    def __post_init__(self):
        if not self.label:
            raise ConfigError("class label must be nonempty")
        if self.accumulator is not None and self.accumulator.dim != self.prototype.dim:
            raise DimensionError("accumulator dim differs from prototype dim")


class PrototypeMemory:
    """Ordered label -> (prototype, accumulator, sample count) store."""

    def __init__(self, dim: int, classes: Sequence[ClassEntry]):
        if dim < 1:
            raise DimensionError(f"dim must be positive, got {dim}")
        labels = [c.label for c in classes]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate class labels: {labels}")
        for c in classes:
            if c.prototype.dim != dim:
                raise DimensionError(
                    f"class {c.label!r} prototype dim {c.prototype.dim} != memory dim {dim}"
                )
        self.dim = dim
        self.classes: tuple[ClassEntry, ...] = tuple(classes)
        self._by_label = {c.label: c for c in self.classes}

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.classes)

    def __len__(self) -> int:
        return len(self.classes)

    def __contains__(self, label: str) -> bool:
        return label in self._by_label

    def entry(self, label: str) -> ClassEntry:
        try:
            return self._by_label[label]
        except KeyError:
            raise ConfigError(f"unknown label: {label!r}") from None

    def prototype_words(self) -> np.ndarray:
        """(L, W) uint64 matrix of prototype words, in class order."""
        return np.stack([c.prototype.words for c in self.classes])

    def __eq__(self, other) -> bool:
        if not isinstance(other, PrototypeMemory):
            return NotImplemented
        if self.dim != other.dim or len(self) != len(other):
            return False
        for a, b in zip(self.classes, other.classes):
            if (
                a.label != b.label
                or a.n_samples != b.n_samples
                or a.merged != b.merged
                or a.prototype != b.prototype
                or a.accumulator != b.accumulator
            ):
                return False
        return True

    __hash__ = None

    def __repr__(self) -> str:
        return f"PrototypeMemory(dim={self.dim}, labels={list(self.labels)})"


@dataclass(frozen=True)
class ClassificationResult:
    predicted_label: str
    labels: tuple[str, ...]
    distances: tuple[int, ...]  # Hamming, in class order
    normalized: tuple[float, ...]


@dataclass(frozen=True)
class EvaluationReport:
    accuracy: float
    labels: tuple[str, ...]
    confusion: np.ndarray = field(repr=False)  # rows true, cols predicted
    per_label_counts: np.ndarray = field(repr=False)

    @property
    def total(self) -> int:
        return int(self.confusion.sum())


def train(samples: Iterable[tuple[Hypervector, str]]) -> PrototypeMemory:
    """Bundle every label's hypervectors into a prototype.

    Classes register in first-appearance order; the result does not depend on
    sample order within a label.
    """
    samples = list(samples)
    if not samples:
        raise ConfigError("cannot train on an empty sample list")
    dim = samples[0][0].dim
    accs: dict[str, BundleAccumulator] = {}
    for hv, label in samples:
        if hv.dim != dim:
            raise DimensionError(f"sample dim {hv.dim} != {dim}")
        if label not in accs:
            accs[label] = BundleAccumulator(dim)
        accs[label].add(hv)
    entries = [
        ClassEntry(
            label=label,
            prototype=finalize_majority(acc),
            accumulator=acc,
            n_samples=acc.n_added,
        )
        for label, acc in accs.items()
    ]
    return PrototypeMemory(dim, entries)


def _distances_to_prototypes(memory: PrototypeMemory, query_words: np.ndarray) -> np.ndarray:
    """(n, L) int64 Hamming distances for stacked query words (n, W)."""
    protos = memory.prototype_words()  # (L, W)
    out = np.empty((query_words.shape[0], len(memory)), dtype=np.int64)
    for start in range(0, query_words.shape[0], _EVAL_CHUNK):
        block = query_words[start : start + _EVAL_CHUNK]
        xor = block[:, None, :] ^ protos[None, :, :]
        out[start : start + block.shape[0]] = np.bitwise_count(xor).sum(
            axis=2, dtype=np.int64
        )
    return out


def classify(memory: PrototypeMemory, query: Hypervector) -> ClassificationResult:
    """argmin of Hamming distance over prototypes; ties go to the
    earliest-registered class."""
    if len(memory) == 0:
        raise ConfigError("cannot classify with an empty memory")
    if query.dim != memory.dim:
        raise DimensionError(f"query dim {query.dim} != memory dim {memory.dim}")
    dists = _distances_to_prototypes(memory, query.words[None, :])[0]
    best = int(np.argmin(dists))  # first minimum = registration order tie-break
    return ClassificationResult(
        predicted_label=memory.classes[best].label,
        labels=memory.labels,
        distances=tuple(int(d) for d in dists),
        normalized=tuple(float(d) / memory.dim for d in dists),
    )


def similarity_profile(memory: PrototypeMemory, query: Hypervector) -> list[tuple[str, float]]:
    """Full (label, normalized distance) profile, most similar first."""
    result = classify(memory, query)
    order = np.argsort(result.normalized, kind="stable")
    return [(result.labels[i], result.normalized[i]) for i in order]


def evaluate(
    memory: PrototypeMemory, test: Iterable[tuple[Hypervector, str]]
) -> EvaluationReport:
    """Accuracy plus an L x L confusion matrix (rows true, cols predicted)."""
    test = list(test)
    if not test:
        raise ConfigError("cannot evaluate on an empty test set")
    label_pos = {label: i for i, label in enumerate(memory.labels)}
    for _, label in test:
        if label not in label_pos:
            raise ConfigError(f"test label {label!r} not present in memory")
    for hv, _ in test:
        if hv.dim != memory.dim:
            raise DimensionError(f"test sample dim {hv.dim} != memory dim {memory.dim}")
    words = np.stack([hv.words for hv, _ in test])
    dists = _distances_to_prototypes(memory, words)
    predicted = np.argmin(dists, axis=1)
    n_classes = len(memory)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for (_, label), pred in zip(test, predicted):
        confusion[label_pos[label], pred] += 1
    accuracy = float(np.trace(confusion)) / len(test)
    return EvaluationReport(
        accuracy=accuracy,
        labels=memory.labels,
        confusion=confusion,
        per_label_counts=confusion.sum(axis=1),
    )


def recalibrate(
    memory: PrototypeMemory,
    new_samples: Iterable[tuple[Hypervector, str]],
    p: float,
    seed: int,
) -> PrototypeMemory:
    """Merge freshly bundled prototypes into the stored ones with weight p.

    Labels without new samples are untouched. Per-class merge seeds come from
    (seed, label), so recalibrating disjoint label subsets commutes.
    """
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"merge probability must be in [0, 1], got {p}")
    grouped: dict[str, list[Hypervector]] = {}
    for hv, label in new_samples:
        if label not in memory:
            raise ConfigError(f"label {label!r} not present in memory")
        if hv.dim != memory.dim:
            raise DimensionError(f"sample dim {hv.dim} != memory dim {memory.dim}")
        grouped.setdefault(label, []).append(hv)
    if not grouped:
        raise ConfigError("no new samples supplied")
    entries = []
    for entry in memory.classes:
        if entry.label in grouped:
            fresh = bundle(grouped[entry.label])
            updated = merge_probabilistic(
                entry.prototype, fresh, p, derive_key(seed, "recalibrate", entry.label)
            )
            entries.append(
                ClassEntry(
                    label=entry.label,
                    prototype=updated,
                    accumulator=entry.accumulator,
                    n_samples=entry.n_samples,
                    merged=True,
                )
            )
        else:
            entries.append(entry)
    return PrototypeMemory(memory.dim, entries)
