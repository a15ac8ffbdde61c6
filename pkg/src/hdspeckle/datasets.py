"""Dataset generation: scenario -> rendered frames (on disk) or encoded
hypervectors (in memory).

Samples are rendered in a seeded global collection order, interleaving labels
the way a robot arm would visit random contact positions, while the drift
random walk advances `steps_per_sample` between consecutive renders. Both
pipelines share the same plan, the same gemm batching, and the same keyed
streams, so the hypervectors produced by encoding a written dataset are
bit-identical to the in-memory ones.

Per-sample jitter and frame seeds are keyed by (scenario seed, label, sample
index), never by collection position, and splits reuse the stratified
manifest split, so every artifact is reproducible from the scenario alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from .dataio import DatasetManifest, ManifestRecord, split_dataset, write_frame, write_manifest
from .frames import SpeckleFrame
from .hv import DEFAULT_POLICY, BinarizePolicy, Hypervector, binarize_frame
from .rng import derive_key, permutation, philox_stream
from .scenario import ScenarioConfig
from .simulator import (
    RENDER_BATCH,
    StimulusSpec,
    advance_drift,
    build_model,
    initial_drift,
    phase_perturbation,
    render_batch,
)


@dataclass(frozen=True)
class PlannedSample:
    label: str
    sample_index: int
    stimulus: StimulusSpec
    frame_seed: int


@dataclass(frozen=True)
class EncodedSample:
    label: str
    sample_index: int
    split: str
    hv: Hypervector


@dataclass(frozen=True)
class EncodedDataset:
    """In-memory dataset: encoded hypervectors plus split assignments, in
    label-major order (labels in scenario order, sample index ascending)."""

    samples: tuple[EncodedSample, ...]
    labels: tuple[str, ...]
    dim: int
    scenario_hash: str

    def split_samples(self, split: str | None = None) -> list[tuple[Hypervector, str]]:
        return [(s.hv, s.label) for s in self.samples if split is None or s.split == split]

    def grouped(self, split: str | None = None) -> dict[str, list[Hypervector]]:
        out: dict[str, list[Hypervector]] = {label: [] for label in self.labels}
        for s in self.samples:
            if split is None or s.split == split:
                out[s.label].append(s.hv)
        return out

    def train_prefix(self, n_per_label: int) -> list[tuple[Hypervector, str]]:
        """First n train samples per label, by ascending sample index."""
        taken: dict[str, int] = {label: 0 for label in self.labels}
        picked = []
        for s in self.samples:  # label-major, index-ascending
            if s.split == "train" and taken[s.label] < n_per_label:
                picked.append((s.hv, s.label))
                taken[s.label] += 1
        if any(count < n_per_label for count in taken.values()):
            short = {lb: c for lb, c in taken.items() if c < n_per_label}
            raise ValueError(f"not enough train samples for prefix {n_per_label}: {short}")
        return picked


def _sample_jitter(config: ScenarioConfig, label: str, index: int) -> tuple[float, float]:
    """(position delta, depth delta) for one sample, keyed by (seed, label, index)."""
    jit = config.jitter
    if jit.position_sigma == 0 and jit.depth_sigma == 0:
        return 0.0, 0.0
    g = philox_stream(derive_key(config.seed, "jitter", label, index))
    z = g.standard_normal(2)
    return jit.position_sigma * z[0], jit.depth_sigma * z[1]


def plan_samples(config: ScenarioConfig) -> list[PlannedSample]:
    """All (label, index) samples in the seeded global collection order."""
    pairs = [
        (spec, k) for spec in config.labels for k in range(config.samples_per_label)
    ]
    order = permutation(derive_key(config.seed, "collection-order"), len(pairs))
    planned = []
    for pos in order:
        spec, k = pairs[pos]
        dpos, ddepth = _sample_jitter(config, spec.label, k)
        base = spec.stimulus(config.kernel_width)
        stimulus = StimulusSpec(
            position=float(np.clip(base.position + dpos, 0.0, 1.0)),
            depth=max(base.depth + ddepth, 0.0),
            kernel_width=base.kernel_width,
            texture_seed=base.texture_seed,
            texture_gain=base.texture_gain,
        )
        planned.append(
            PlannedSample(
                label=spec.label,
                sample_index=k,
                stimulus=stimulus,
                frame_seed=derive_key(config.seed, "frame", spec.label, k),
            )
        )
    return planned


def iter_rendered(config: ScenarioConfig) -> Iterator[tuple[PlannedSample, SpeckleFrame]]:
    """Render the scenario in collection order, batching the field gemm."""
    model = build_model(
        config.sim.n_modes, config.sim.height, config.sim.width, config.sim.model_seed
    )
    plan = plan_samples(config)
    drift = advance_drift(
        initial_drift(model.n_modes, config.drift.rate, config.drift.seed),
        config.drift.start_step,
    )
    for start in range(0, len(plan), RENDER_BATCH):
        batch = plan[start : start + RENDER_BATCH]
        phases = np.empty((len(batch), model.n_modes), dtype=np.float64)
        for row, item in enumerate(batch):
            phases[row] = (
                model.base_phase
                + drift.phase_offset
                + phase_perturbation(model, item.stimulus)
            )
            drift = advance_drift(drift, config.drift.steps_per_sample)
        frames = render_batch(model, phases, config.noise, [i.frame_seed for i in batch])
        yield from zip(batch, frames)


def _split_by_key(config: ScenarioConfig) -> dict[tuple[str, int], str]:
    """(label, sample_index) -> split, via the stratified manifest split."""
    records = tuple(
        ManifestRecord(_frame_relpath(label, k), label, "test", k)
        for label in config.label_names
        for k in range(config.samples_per_label)
    )
    manifest = DatasetManifest(records, config.seed, config.scenario_hash())
    manifest = split_dataset(manifest, config.split_fraction, config.seed)
    return {(r.label, r.sample_index): r.split for r in manifest.records}


def _frame_relpath(label: str, index: int) -> str:
    safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in label)
    return f"frames/{safe}_{index:05d}.pgm"


def generate_dataset(config: ScenarioConfig, out_dir: str | Path) -> DatasetManifest:
    """Render every sample to PGM and write the manifest; returns it."""
    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    relpaths = {
        (label, k): _frame_relpath(label, k)
        for label in config.label_names
        for k in range(config.samples_per_label)
    }
    if len(set(relpaths.values())) != len(relpaths):
        raise ValueError("sanitized frame paths collide; rename scenario labels")
    for item, frame in iter_rendered(config):
        write_frame(out / relpaths[(item.label, item.sample_index)], frame)
    splits = _split_by_key(config)
    records = tuple(
        ManifestRecord(relpaths[(label, k)], label, splits[(label, k)], k)
        for label in config.label_names
        for k in range(config.samples_per_label)
    )
    manifest = DatasetManifest(records, config.seed, config.scenario_hash())
    write_manifest(out / "manifest.csv", manifest)
    return manifest


def encode_dataset(
    config: ScenarioConfig,
    policy: BinarizePolicy = DEFAULT_POLICY,
    frame_hook: Callable[[PlannedSample, SpeckleFrame], None] | None = None,
) -> EncodedDataset:
    """Render and binarize without touching disk.

    `frame_hook` sees every rendered frame before it is dropped (used by
    analytics that need raw intensities without retaining the whole set).
    """
    encoded: dict[tuple[str, int], Hypervector] = {}
    for item, frame in iter_rendered(config):
        if frame_hook is not None:
            frame_hook(item, frame)
        encoded[(item.label, item.sample_index)] = binarize_frame(frame, policy)
    splits = _split_by_key(config)
    samples = tuple(
        EncodedSample(label, k, splits[(label, k)], encoded[(label, k)])
        for label in config.label_names
        for k in range(config.samples_per_label)
    )
    return EncodedDataset(
        samples=samples,
        labels=config.label_names,
        dim=config.sim.height * config.sim.width,
        scenario_hash=config.scenario_hash(),
    )
