"""Bit-exact persistence: PGM frames, CSV manifests, HDCM model files.

Formats:
  frames    binary PGM "P5", maxval 65535, big-endian 16-bit samples (the PGM
            convention; everything else in the package is little-endian).
  manifest  UTF-8 CSV with two leading "# key=value" metadata lines (dataset
            seed, scenario hash), then a "frame_path,label,split,sample_index"
            header row.
  models    "HDCM" magic, u16 version, u32 dimension, u16 class count, then
            per class: length-prefixed UTF-8 label, u32 sample count, u8
            merged flag, prototype words as little-endian u64, u8
            accumulator-present flag, optional u32 counters (the
            accumulator's n_added equals the stored sample count).

Writers write to a temp file and rename, so readers never observe a partial
file. Every round-trip is bit-exact.
"""

from __future__ import annotations

import csv
import io
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, FormatError
from .frames import SpeckleFrame
from .hv import DEFAULT_POLICY, BinarizePolicy, BundleAccumulator, Hypervector, binarize_frame
from .memory import ClassEntry, PrototypeMemory
from .rng import derive_key, permutation

PGM_MAXVAL = 65535
HDCM_MAGIC = b"HDCM"
HDCM_VERSION = 1
MANIFEST_HEADER = ["frame_path", "label", "split", "sample_index"]
SPLITS = ("train", "test")


def _atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# PGM frames


def write_frame(path: str | Path, frame: SpeckleFrame) -> None:
    header = f"P5\n{frame.width} {frame.height}\n{PGM_MAXVAL}\n".encode("ascii")
    _atomic_write_bytes(path, header + frame.pixels.astype(">u2").tobytes())


def _next_pgm_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":  # comment runs to end of line
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    if pos >= n:
        raise FormatError("unexpected end of PGM header")
    start = pos
    while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    return data[start:pos], pos


def read_frame(path: str | Path) -> SpeckleFrame:
    data = Path(path).read_bytes()
    magic, pos = _next_pgm_token(data, 0)
    if magic != b"P5":
        raise FormatError(f"not a binary PGM (magic {magic!r})")
    fields = []
    for name in ("width", "height", "maxval"):
        token, pos = _next_pgm_token(data, pos)
        try:
            value = int(token)
        except ValueError:
            raise FormatError(f"invalid PGM {name}: {token!r}") from None
        if value <= 0:
            raise FormatError(f"nonpositive PGM {name}: {value}")
        fields.append(value)
    width, height, maxval = fields
    if maxval != PGM_MAXVAL:
        raise FormatError(f"unsupported PGM maxval {maxval}, expected {PGM_MAXVAL}")
    pos += 1  # exactly one whitespace byte separates header from samples
    expected = width * height * 2
    payload = data[pos:]
    if len(payload) < expected:
        raise FormatError(f"truncated PGM payload: {len(payload)} < {expected} bytes")
    if len(payload) > expected:
        raise FormatError(f"trailing bytes after PGM payload: {len(payload) - expected}")
    pixels = np.frombuffer(payload, dtype=">u2").astype(np.uint16).reshape(height, width)
    return SpeckleFrame(pixels)


# ---------------------------------------------------------------------------
# dataset manifest


@dataclass(frozen=True)
class ManifestRecord:
    frame_path: str
    label: str
    split: str
    sample_index: int

    def __post_init__(self):
        if not self.frame_path:
            raise ConfigError("frame_path must be nonempty")
        if not self.label:
            raise ConfigError("label must be nonempty")
        if self.split not in SPLITS:
            raise ConfigError(f"unknown split {self.split!r}")
        if self.sample_index < 0:
            raise ConfigError("sample_index must be nonnegative")


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[ManifestRecord, ...]
    dataset_seed: int
    scenario_hash: str

    def __post_init__(self):
        paths = [r.frame_path for r in self.records]
        if len(set(paths)) != len(paths):
            raise ConfigError("duplicate frame paths in manifest")

    @property
    def labels(self) -> tuple[str, ...]:
        """Distinct labels in first-appearance order."""
        return tuple(dict.fromkeys(r.label for r in self.records))

    def subset(self, split: str) -> tuple[ManifestRecord, ...]:
        if split not in SPLITS:
            raise ConfigError(f"unknown split {split!r}")
        return tuple(r for r in self.records if r.split == split)


def write_manifest(path: str | Path, manifest: DatasetManifest) -> None:
    buf = io.StringIO()
    buf.write(f"# dataset_seed={manifest.dataset_seed}\n")
    buf.write(f"# scenario_hash={manifest.scenario_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MANIFEST_HEADER)
    for r in manifest.records:
        writer.writerow([r.frame_path, r.label, r.split, r.sample_index])
    _atomic_write_bytes(path, buf.getvalue().encode("utf-8"))


def read_manifest(path: str | Path) -> DatasetManifest:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        raise FormatError("empty manifest file")
    lines = text.splitlines()
    meta: dict[str, str] = {}
    body_start = 0
    for i, line in enumerate(lines):
        if not line.startswith("#"):
            body_start = i
            break
        key, sep, value = line[1:].strip().partition("=")
        if sep:
            meta[key.strip()] = value.strip()
    else:
        raise FormatError("manifest has no header row")
    for key in ("dataset_seed", "scenario_hash"):
        if key not in meta:
            raise FormatError(f"manifest missing '{key}' metadata line")
    try:
        dataset_seed = int(meta["dataset_seed"])
    except ValueError:
        raise FormatError(f"invalid dataset_seed: {meta['dataset_seed']!r}") from None
    rows = list(csv.reader(lines[body_start:]))
    if not rows or rows[0] != MANIFEST_HEADER:
        raise FormatError(f"bad manifest header: {rows[0] if rows else 'missing'}")
    records = []
    for row in rows[1:]:
        if not row:
            continue
        if len(row) != len(MANIFEST_HEADER):
            raise FormatError(f"malformed manifest row: {row}")
        frame_path, label, split, sample_index = row
        if split not in SPLITS:
            raise FormatError(f"unknown split token {split!r}")
        try:
            idx = int(sample_index)
        except ValueError:
            raise FormatError(f"invalid sample_index: {sample_index!r}") from None
        try:
            records.append(ManifestRecord(frame_path, label, split, idx))
        except ConfigError as exc:
            raise FormatError(str(exc)) from None
    try:
        return DatasetManifest(tuple(records), dataset_seed, meta["scenario_hash"])
    except ConfigError as exc:
        raise FormatError(str(exc)) from None


def split_dataset(
    manifest: DatasetManifest, train_fraction: float, seed: int
) -> DatasetManifest:
    """Reassign splits: per label, exactly round(fraction * n) records become
    train, chosen by a deterministic shuffle keyed by (seed, label)."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train fraction must be in (0, 1), got {train_fraction}")
    by_label: dict[str, list[int]] = {}
    for i, r in enumerate(manifest.records):
        by_label.setdefault(r.label, []).append(i)
    assign: dict[int, str] = {}
    for label, indices in by_label.items():
        n = len(indices)
        n_train = int(np.floor(train_fraction * n + 0.5))  # round half up
        order = permutation(derive_key(seed, "split", label), n)
        for rank, j in enumerate(order):
            assign[indices[j]] = "train" if rank < n_train else "test"
    records = tuple(
        ManifestRecord(r.frame_path, r.label, assign[i], r.sample_index)
        for i, r in enumerate(manifest.records)
    )
    return DatasetManifest(records, manifest.dataset_seed, manifest.scenario_hash)


# ---------------------------------------------------------------------------
# HDCM model files


def save_memory(path: str | Path, memory: PrototypeMemory) -> None:
    if len(memory) > 0xFFFF:
        raise ConfigError(f"too many classes for HDCM: {len(memory)}")
    buf = bytearray()
    buf += HDCM_MAGIC
    buf += struct.pack("<HIH", HDCM_VERSION, memory.dim, len(memory))
    for entry in memory.classes:
        label_bytes = entry.label.encode("utf-8")
        if len(label_bytes) > 0xFFFF:
            raise ConfigError(f"label too long for HDCM: {entry.label!r}")
        buf += struct.pack("<H", len(label_bytes))
        buf += label_bytes
        buf += struct.pack("<IB", entry.n_samples, int(entry.merged))
        buf += entry.prototype.words.astype("<u8").tobytes()
        if entry.accumulator is not None:
            buf += struct.pack("<B", 1)
            buf += entry.accumulator.counts.astype("<u4").tobytes()
        else:
            buf += struct.pack("<B", 0)
    _atomic_write_bytes(path, bytes(buf))


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"truncated HDCM file: need {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_memory(path: str | Path) -> PrototypeMemory:
    cur = _Cursor(Path(path).read_bytes())
    if cur.take(4) != HDCM_MAGIC:
        raise FormatError("bad HDCM magic")
    version, dim, n_classes = cur.unpack("<HIH")
    if version != HDCM_VERSION:
        raise FormatError(f"unsupported HDCM version {version}, reader supports {HDCM_VERSION}")
    if dim < 1:
        raise FormatError(f"invalid dimension {dim}")
    n_words = (dim + 63) // 64
    entries = []
    for _ in range(n_classes):
        (label_len,) = cur.unpack("<H")
        try:
            label = cur.take(label_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"undecodable label bytes: {exc}") from None
        n_samples, merged = cur.unpack("<IB")
        if merged not in (0, 1):
            raise FormatError(f"invalid merged flag {merged}")
        words = np.frombuffer(cur.take(n_words * 8), dtype="<u8").astype(np.uint64)
        try:
            prototype = Hypervector(dim, words)
        except DimensionError as exc:
            raise FormatError(f"invalid prototype for {label!r}: {exc}") from None
        (acc_present,) = cur.unpack("<B")
        accumulator = None
        if acc_present == 1:
            counts = np.frombuffer(cur.take(dim * 4), dtype="<u4").astype(np.uint32)
            try:
                accumulator = BundleAccumulator(dim, counts, n_added=n_samples)
            except (ConfigError, DimensionError) as exc:
                raise FormatError(f"invalid accumulator for {label!r}: {exc}") from None
        elif acc_present != 0:
            raise FormatError(f"invalid accumulator flag {acc_present}")
        entries.append(ClassEntry(label, prototype, accumulator, n_samples, bool(merged)))
    if cur.pos != len(cur.data):
        raise FormatError(f"trailing bytes after HDCM payload: {len(cur.data) - cur.pos}")
    try:
        return PrototypeMemory(dim, entries)
    except (ConfigError, DimensionError) as exc:
        raise FormatError(str(exc)) from None


# ---------------------------------------------------------------------------
# dataset loading helpers


def load_frames(
    dataset_dir: str | Path, records: Iterable[ManifestRecord]
) -> list[SpeckleFrame]:
    root = Path(dataset_dir)
    return [read_frame(root / r.frame_path) for r in records]


def load_encoded_samples(
    dataset_dir: str | Path,
    split: str | None = None,
    policy: BinarizePolicy = DEFAULT_POLICY,
) -> list[tuple[Hypervector, str]]:
    """Read a dataset directory and binarize its frames.

    Returns (hypervector, label) pairs in manifest record order, optionally
    restricted to one split.
    """
    root = Path(dataset_dir)
    manifest = read_manifest(root / "manifest.csv")
    records = manifest.records if split is None else manifest.subset(split)
    return [
        (binarize_frame(read_frame(root / r.frame_path), policy), r.label) for r in records
    ]
