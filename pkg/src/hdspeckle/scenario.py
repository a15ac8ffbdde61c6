"""Scenario configuration: everything a reproducible experiment needs.

Scenarios are plain JSON files; the schema mirrors the dataclasses below.
Optional sections fall back to defaults, unknown keys are rejected so typos
fail loudly, and a canonical hash of the fully-normalized config is recorded
in every dataset manifest for provenance.

Example::

    {
      "name": "position5",
      "seed": 42,
      "samples_per_label": 100,
      "split_fraction": 0.8,
      "kernel_width": 0.05,
      "sim": {"n_modes": 512, "height": 100, "width": 100, "model_seed": 7},
      "noise": {"read_noise_sigma": 0.05},
      "drift": {"rate": 0.1, "seed": 11, "start_step": 0, "steps_per_sample": 1},
      "jitter": {"position_sigma": 0.012, "depth_sigma": 0.1},
      "labels": [
        {"label": "L1", "position": 0.15, "depth": 1.3},
        {"label": "None", "position": 0.5, "depth": 0.0}
      ],
      "experiment": {"n_sweep": [5, 10], "p_list": [0.5], "n_new_list": [10]}
    }
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .hv import MAX_DIM
from .simulator import NoiseSpec, StimulusSpec


@dataclass(frozen=True)
class LabelSpec:
    """One class: its stimulus parameters; kernel_width of None inherits the
    scenario default."""

    label: str
    position: float = 0.0
    depth: float = 0.0
    kernel_width: float | None = None
    texture_seed: int | None = None
    texture_gain: float = 0.0

    def __post_init__(self):
        if not self.label:
            raise ConfigError("label must be nonempty")

    def stimulus(self, default_kernel_width: float) -> StimulusSpec:
        return StimulusSpec(
            position=self.position,
            depth=self.depth,
            kernel_width=(
                self.kernel_width if self.kernel_width is not None else default_kernel_width
            ),
            texture_seed=self.texture_seed,
            texture_gain=self.texture_gain,
        )


@dataclass(frozen=True)
class SimParams:
    n_modes: int = 512
    height: int = 100
    width: int = 100
    model_seed: int = 0

    def __post_init__(self):
        if self.n_modes < 2:
            raise ConfigError(f"n_modes must be >= 2, got {self.n_modes}")
        if self.height < 1 or self.width < 1 or self.height * self.width < 2:
            raise ConfigError(f"detector must have >= 2 pixels, got {self.height}x{self.width}")
        if self.height * self.width > MAX_DIM:
            raise ConfigError(f"detector size {self.height * self.width} exceeds {MAX_DIM}")


@dataclass(frozen=True)
class DriftSchedule:
    """Environmental random walk: the dataset starts `start_step` steps after
    the reference state and advances `steps_per_sample` between consecutive
    samples in collection order."""

    rate: float = 0.0
    seed: int = 0
    start_step: int = 0
    steps_per_sample: int = 0

    def __post_init__(self):
        if self.rate < 0:
            raise ConfigError(f"drift rate must be nonnegative, got {self.rate}")
        if self.start_step < 0 or self.steps_per_sample < 0:
            raise ConfigError("drift steps must be nonnegative")


@dataclass(frozen=True)
class JitterSpec:
    """Per-sample stimulus noise (position and depth standard deviations)."""

    position_sigma: float = 0.0
    depth_sigma: float = 0.0

    def __post_init__(self):
        if self.position_sigma < 0 or self.depth_sigma < 0:
            raise ConfigError("jitter sigmas must be nonnegative")


@dataclass(frozen=True)
class ExperimentParams:
    """Optional sweep lists consumed by the sweep/recalibrate commands."""

    n_sweep: tuple[int, ...] = ()
    p_list: tuple[float, ...] = ()
    n_new_list: tuple[int, ...] = ()

    def __post_init__(self):
        if any(n < 1 for n in self.n_sweep):
            raise ConfigError("n_sweep entries must be positive")
        if any(not 0.0 <= p <= 1.0 for p in self.p_list):
            raise ConfigError("p_list entries must be in [0, 1]")
        if any(n < 1 for n in self.n_new_list):
            raise ConfigError("n_new_list entries must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    labels: tuple[LabelSpec, ...]
    samples_per_label: int
    seed: int = 0
    split_fraction: float = 0.8
    kernel_width: float = 0.05
    encoder_mode: str = "exact_balance"
    sim: SimParams = field(default_factory=SimParams)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    drift: DriftSchedule = field(default_factory=DriftSchedule)
    jitter: JitterSpec = field(default_factory=JitterSpec)
    experiment: ExperimentParams = field(default_factory=ExperimentParams)

    def __post_init__(self):
        if not self.name:
            raise ConfigError("scenario name must be nonempty")
        if not self.labels:
            raise ConfigError("scenario declares no labels")
        names = [spec.label for spec in self.labels]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate labels: {names}")
        if self.samples_per_label < 1:
            raise ConfigError(f"samples_per_label must be positive, got {self.samples_per_label}")
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigError(f"split_fraction must be in (0, 1), got {self.split_fraction}")
        if self.kernel_width <= 0:
            raise ConfigError(f"kernel_width must be positive, got {self.kernel_width}")
        if self.encoder_mode != "exact_balance":
            raise ConfigError(f"unsupported encoder mode: {self.encoder_mode!r}")
        for spec in self.labels:
            spec.stimulus(self.kernel_width)  # full stimulus validation

    @property
    def label_names(self) -> tuple[str, ...]:
        return tuple(spec.label for spec in self.labels)

    @property
    def total_samples(self) -> int:
        return len(self.labels) * self.samples_per_label

    def with_drift_start(self, start_step: int) -> "ScenarioConfig":
        """Same scenario observed later in time (e.g. a day-16 recollection)."""
        drift = DriftSchedule(
            self.drift.rate, self.drift.seed, start_step, self.drift.steps_per_sample
        )
        return ScenarioConfig(
            name=self.name,
            labels=self.labels,
            samples_per_label=self.samples_per_label,
            seed=self.seed,
            split_fraction=self.split_fraction,
            kernel_width=self.kernel_width,
            encoder_mode=self.encoder_mode,
            sim=self.sim,
            noise=self.noise,
            drift=drift,
            jitter=self.jitter,
            experiment=self.experiment,
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "samples_per_label": self.samples_per_label,
            "split_fraction": self.split_fraction,
            "kernel_width": self.kernel_width,
            "encoder": {"mode": self.encoder_mode},
            "sim": {
                "n_modes": self.sim.n_modes,
                "height": self.sim.height,
                "width": self.sim.width,
                "model_seed": self.sim.model_seed,
            },
            "noise": {"read_noise_sigma": self.noise.read_noise_sigma},
            "drift": {
                "rate": self.drift.rate,
                "seed": self.drift.seed,
                "start_step": self.drift.start_step,
                "steps_per_sample": self.drift.steps_per_sample,
            },
            "jitter": {
                "position_sigma": self.jitter.position_sigma,
                "depth_sigma": self.jitter.depth_sigma,
            },
            "labels": [
                {
                    "label": spec.label,
                    "position": spec.position,
                    "depth": spec.depth,
                    "kernel_width": spec.kernel_width,
                    "texture_seed": spec.texture_seed,
                    "texture_gain": spec.texture_gain,
                }
                for spec in self.labels
            ],
            "experiment": {
                "n_sweep": list(self.experiment.n_sweep),
                "p_list": list(self.experiment.p_list),
                "n_new_list": list(self.experiment.n_new_list),
            },
        }

    def scenario_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _take(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def scenario_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"scenario must be a JSON object, got {type(data).__name__}")
    _take(
        data,
        {
            "name",
            "seed",
            "samples_per_label",
            "split_fraction",
            "kernel_width",
            "encoder",
            "sim",
            "noise",
            "drift",
            "jitter",
            "labels",
            "experiment",
        },
        "scenario",
    )
    try:
        encoder = data.get("encoder", {})
        _take(encoder, {"mode"}, "encoder")
        sim = data.get("sim", {})
        _take(sim, {"n_modes", "height", "width", "model_seed"}, "sim")
        noise = data.get("noise", {})
        _take(noise, {"read_noise_sigma"}, "noise")
        drift = data.get("drift", {})
        _take(drift, {"rate", "seed", "start_step", "steps_per_sample"}, "drift")
        jitter = data.get("jitter", {})
        _take(jitter, {"position_sigma", "depth_sigma"}, "jitter")
        experiment = data.get("experiment", {})
        _take(experiment, {"n_sweep", "p_list", "n_new_list"}, "experiment")
        labels = []
        for raw in data.get("labels", []):
            _take(
                raw,
                {"label", "position", "depth", "kernel_width", "texture_seed", "texture_gain"},
                "label",
            )
            labels.append(
                LabelSpec(
                    label=raw.get("label", ""),
                    position=raw.get("position", 0.0),
                    depth=raw.get("depth", 0.0),
                    kernel_width=raw.get("kernel_width"),
                    texture_seed=raw.get("texture_seed"),
                    texture_gain=raw.get("texture_gain", 0.0),
                )
            )
        return ScenarioConfig(
            name=data.get("name", ""),
            labels=tuple(labels),
            samples_per_label=data.get("samples_per_label", 0),
            seed=data.get("seed", 0),
            split_fraction=data.get("split_fraction", 0.8),
            kernel_width=data.get("kernel_width", 0.05),
            encoder_mode=encoder.get("mode", "exact_balance"),
            sim=SimParams(
                n_modes=sim.get("n_modes", 512),
                height=sim.get("height", 100),
                width=sim.get("width", 100),
                model_seed=sim.get("model_seed", 0),
            ),
            noise=NoiseSpec(read_noise_sigma=noise.get("read_noise_sigma", 0.0)),
            drift=DriftSchedule(
                rate=drift.get("rate", 0.0),
                seed=drift.get("seed", 0),
                start_step=drift.get("start_step", 0),
                steps_per_sample=drift.get("steps_per_sample", 0),
            ),
            jitter=JitterSpec(
                position_sigma=jitter.get("position_sigma", 0.0),
                depth_sigma=jitter.get("depth_sigma", 0.0),
            ),
            experiment=ExperimentParams(
                n_sweep=tuple(experiment.get("n_sweep", ())),
                p_list=tuple(experiment.get("p_list", ())),
                n_new_list=tuple(experiment.get("n_new_list", ())),
            ),
        )
    except (TypeError, AttributeError) as exc:
        raise ConfigError(f"malformed scenario: {exc}") from None


def load_scenario(path: str | Path) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario file is not valid JSON: {exc}") from None
    return scenario_from_dict(data)


def save_scenario(path: str | Path, config: ScenarioConfig) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")
