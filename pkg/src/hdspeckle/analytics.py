"""Correlation analytics: mean Pearson matrices between speckle frames,
between binary hypervectors, and between prototypes and hypervectors, plus
the max-contrast summary and basic speckle statistics.

All moments are population (1/n) moments. The sample-pair structure averages
ordered pairs (k, k') with k' != k; the same-index exclusion applies to every
label pair exactly as the averaging is defined, which leaves symmetric kinds
exactly symmetric. Binary correlations are computed from integer popcounts,
so they are exact: for balanced hypervectors the value equals 1 - 2*Ham/D.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DegenerateDataError, DimensionError
from .frames import SpeckleFrame
from .hv import Hypervector
from .memory import EvaluationReport, PrototypeMemory

_WORD_CHUNK = 512  # words per block in pairwise popcount loops


class CorrelationKind(enum.Enum):
    SPECKLE = "speckle"
    HV = "hv"
    PROTOTYPE = "prototype"


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: tuple[str, ...]
    values: np.ndarray  # (L, L) float64, rows/cols in label order
    kind: CorrelationKind

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        n = len(self.labels)
        if values.shape != (n, n):
            raise DimensionError(f"matrix shape {values.shape} != ({n}, {n})")
        if not np.isfinite(values).all():
            raise DegenerateDataError("correlation matrix contains non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class SpeckleStats:
    mean: float
    std: float
    contrast_ratio: float
    above_mean_fraction: float


def pearson(x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray) -> float:
    """Sample Pearson coefficient with population (1/n) moments."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
        raise DimensionError(f"need equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise DimensionError("need at least 2 points")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(xc @ xc) / x.size)
    sy = math.sqrt(float(yc @ yc) / y.size)
    if sx == 0.0 or sy == 0.0:
        raise DegenerateDataError("zero-variance input to pearson")
    return float(xc @ yc) / (x.size * sx * sy)


def _check_groups(groups: Mapping[str, Sequence], min_count: int) -> int:
    if not groups:
        raise ConfigError("no label groups supplied")
    counts = {label: len(items) for label, items in groups.items()}
    n_s = next(iter(counts.values()))
    if any(c != n_s for c in counts.values()):
        raise ConfigError(f"unequal group sizes: {counts}")
    if n_s < min_count:
        raise ConfigError(f"need at least {min_count} samples per label, got {n_s}")
    return n_s


def _standardized_rows(frames: Sequence[SpeckleFrame], dim: int) -> np.ndarray:
    """(N_s, D) rows scaled so that row_a . row_b = pearson(frame_a, frame_b)."""
    rows = np.empty((len(frames), dim), dtype=np.float64)
    for i, frame in enumerate(frames):
        if frame.pixel_count != dim:
            raise DimensionError("frames differ in size")
        x = frame.flat().astype(np.float64)
        x -= x.mean()
        norm = math.sqrt(float(x @ x))  # = sigma * sqrt(D) with 1/n moments
        if norm == 0.0:
            raise DegenerateDataError("constant frame in correlation input")
        rows[i] = x / norm
    return rows


def speckle_correlation_matrix(
    frames_by_label: Mapping[str, Sequence[SpeckleFrame]]
) -> CorrelationMatrix:
    """Mean pairwise Pearson correlation between frames, same-index pairs
    excluded; M = N_s * (N_s - 1) ordered pairs per entry."""
    n_s = _check_groups(frames_by_label, 2)
    labels = tuple(frames_by_label)
    dim = next(iter(frames_by_label.values()))[0].pixel_count
    z = {label: _standardized_rows(frames_by_label[label], dim) for label in labels}
    m_pairs = n_s * (n_s - 1)
    values = np.zeros((len(labels), len(labels)))
    for i, li in enumerate(labels):
        for j, lj in enumerate(labels[i:], start=i):
            r = z[li] @ z[lj].T
            entry = (float(r.sum()) - float(np.trace(r))) / m_pairs
            values[i, j] = values[j, i] = entry
    return CorrelationMatrix(labels, values, CorrelationKind.SPECKLE)


def _word_matrix(hvs: Sequence[Hypervector], dim: int) -> np.ndarray:
    for hv in hvs:
        if hv.dim != dim:
            raise DimensionError("hypervectors differ in dimension")
    return np.stack([hv.words for hv in hvs])


def _pairwise_and_popcount(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(n_a, n_b) popcounts of AND between all row pairs, chunked over words."""
    out = np.zeros((a.shape[0], b.shape[0]), dtype=np.int64)
    for start in range(0, a.shape[1], _WORD_CHUNK):
        blk_a = a[:, None, start : start + _WORD_CHUNK]
        blk_b = b[None, :, start : start + _WORD_CHUNK]
        out += np.bitwise_count(blk_a & blk_b).sum(axis=2, dtype=np.int64)
    return out


def _binary_pearson_block(
    a_words: np.ndarray, a_pop: np.ndarray, b_words: np.ndarray, b_pop: np.ndarray, dim: int
) -> np.ndarray:
    """Exact Pearson between binary vectors from integer popcounts."""
    var_a = a_pop * (dim - a_pop)
    var_b = b_pop * (dim - b_pop)
    if (var_a == 0).any() or (var_b == 0).any():
        raise DegenerateDataError("constant hypervector (all zeros or all ones)")
    c11 = _pairwise_and_popcount(a_words, b_words).astype(np.float64)
    num = dim * c11 - np.outer(a_pop, b_pop)
    return num / np.sqrt(np.outer(var_a, var_b))


def _popcounts(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words).sum(axis=1, dtype=np.int64).astype(np.float64)


def hv_correlation_matrix(
    hvs_by_label: Mapping[str, Sequence[Hypervector]]
) -> CorrelationMatrix:
    """Same pair structure as the speckle matrix, bits treated as reals."""
    n_s = _check_groups(hvs_by_label, 2)
    labels = tuple(hvs_by_label)
    dim = next(iter(hvs_by_label.values()))[0].dim
    words = {label: _word_matrix(hvs_by_label[label], dim) for label in labels}
    pops = {label: _popcounts(words[label]) for label in labels}
    m_pairs = n_s * (n_s - 1)
    values = np.zeros((len(labels), len(labels)))
    for i, li in enumerate(labels):
        for j, lj in enumerate(labels[i:], start=i):
            r = _binary_pearson_block(words[li], pops[li], words[lj], pops[lj], dim)
            entry = (float(r.sum()) - float(np.trace(r))) / m_pairs
            values[i, j] = values[j, i] = entry
    return CorrelationMatrix(labels, values, CorrelationKind.HV)


def prototype_correlation_matrix(
    memory: PrototypeMemory, hvs_by_label: Mapping[str, Sequence[Hypervector]]
) -> CorrelationMatrix:
    """Entry (l, l'): mean Pearson between prototype l and the hypervectors of
    label l'. Not symmetric in general."""
    n_s = _check_groups(hvs_by_label, 1)
    labels = tuple(hvs_by_label)
    for label in labels:
        if label not in memory:
            raise ConfigError(f"memory has no prototype for label {label!r}")
    dim = memory.dim
    proto_words = np.stack([memory.entry(label).prototype.words for label in labels])
    proto_pops = _popcounts(proto_words)
    values = np.zeros((len(labels), len(labels)))
    for j, lj in enumerate(labels):
        sample_words = _word_matrix(hvs_by_label[lj], dim)
        r = _binary_pearson_block(
            proto_words, proto_pops, sample_words, _popcounts(sample_words), dim
        )
        values[:, j] = r.mean(axis=1)
    return CorrelationMatrix(labels, values, CorrelationKind.PROTOTYPE)


def contrast(matrix: CorrelationMatrix) -> float:
    """Max over (l, l') of |C_ll - C_ll'| - the separability summary."""
    values = matrix.values
    diag = np.diag(values)
    return float(np.max(np.abs(diag[:, None] - values)))


def speckle_stats(frame: SpeckleFrame) -> SpeckleStats:
    """Population statistics of the pixel intensities."""
    x = frame.flat().astype(np.float64)
    mean = float(x.mean())
    std = float(x.std())
    if mean == 0.0:
        raise DegenerateDataError("all-zero frame")
    return SpeckleStats(
        mean=mean,
        std=std,
        contrast_ratio=std / mean,
        above_mean_fraction=float((x > mean).mean()),
    )


# ---------------------------------------------------------------------------
# CSV / table export


def correlation_to_csv(matrix: CorrelationMatrix) -> str:
    buf = io.StringIO()
    _write_labeled_matrix(buf, matrix.labels, matrix.values, "{:.6f}")
    return buf.getvalue()


def confusion_to_csv(report: EvaluationReport) -> str:
    buf = io.StringIO()
    _write_labeled_matrix(buf, report.labels, report.confusion, "{:d}")
    return buf.getvalue()


def _write_labeled_matrix(buf, labels, values, fmt):
    import csv as _csv

    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow([""] + list(labels))
    for label, row in zip(labels, values):
        writer.writerow([label] + [fmt.format(v) for v in row])


def format_matrix_table(labels: Sequence[str], values: np.ndarray, fmt: str = "{:.4f}") -> str:
    """Aligned plain-text table with row/column labels."""
    cells = [[fmt.format(v) for v in row] for row in values]
    width = max(
        [len(str(label)) for label in labels] + [len(c) for row in cells for c in row]
    )
    head = " " * (width + 2) + "  ".join(str(label).rjust(width) for label in labels)
    lines = [head]
    for label, row in zip(labels, cells):
        lines.append(str(label).rjust(width) + "  " + "  ".join(c.rjust(width) for c in row))
    return "\n".join(lines)
