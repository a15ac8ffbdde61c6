"""Deterministic speckle surrogate for the optical front end.

Detector pixel j sees the field sum_k T_jk * a_k, where T is a random complex
transmission matrix (i.i.d. circular Gaussian entries, variance 1/M) and the
M input modes carry unit-modulus phasors a_k = exp(i(base + drift + touch)).
The resulting intensity is exponentially distributed - fully developed
speckle with unit contrast.

A touch at `position` adds a Gaussian phase bump over the mode axis; textures
add a fixed random phase signature per texture seed; environmental drift is a
per-mode random walk advanced step by step. Every draw comes from a keyed
Philox stream (transmission row chunks, individual drift steps, individual
frames), so any frame is a pure function of (model_seed, stimulus, drift
state, noise spec, frame_seed) regardless of rendering order or batching.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, DegenerateDataError, DimensionError
from .frames import SpeckleFrame
from .hv import MAX_DIM
from .rng import derive_key, philox_stream

# transmission rows are generated in fixed chunks so regeneration is
# bit-identical no matter how much of the matrix a consumer touches
_T_CHUNK_ROWS = 8192

# all rendering goes through gemm batches of this size; the batch layout is
# part of the deterministic contract between disk and in-memory pipelines
RENDER_BATCH = 64

_QUANT_PERCENTILE = 99.9
_QUANT_MAX = 65535


@dataclass(frozen=True)
class ScatterModel:
    """Frozen scattering medium; fully determined by (M, H, W, model_seed)."""

    n_modes: int
    height: int
    width: int
    model_seed: int

    @property
    def n_pixels(self) -> int:
        return self.height * self.width

    @cached_property
    def transmission(self) -> np.ndarray:
        """(D, M) complex64, i.i.d. circular Gaussian entries, variance 1/M."""
        d, m = self.n_pixels, self.n_modes
        out = np.empty((d, m), dtype=np.complex64)
        scale = 1.0 / np.sqrt(2.0 * m)
        for chunk, start in enumerate(range(0, d, _T_CHUNK_ROWS)):
            rows = min(_T_CHUNK_ROWS, d - start)
            g = philox_stream(derive_key(self.model_seed, "transmission", chunk))
            z = g.standard_normal((rows, m, 2), dtype=np.float32)
            block = out[start : start + rows]
            block.real = z[..., 0] * scale
            block.imag = z[..., 1] * scale
        out.setflags(write=False)
        return out

    @cached_property
    def base_phase(self) -> np.ndarray:
        """(M,) float64 resting phases in [0, 2*pi)."""
        g = philox_stream(derive_key(self.model_seed, "base-phase"))
        phase = g.uniform(0.0, 2.0 * np.pi, self.n_modes)
        phase.setflags(write=False)
        return phase


def build_model(n_modes: int, height: int, width: int, model_seed: int) -> ScatterModel:
    if n_modes < 2:
        raise ConfigError(f"need at least 2 modes, got {n_modes}")
    if height < 1 or width < 1 or height * width < 2:
        raise DimensionError(f"detector must have >= 2 pixels, got {height}x{width}")
    if height * width > MAX_DIM:
        raise DimensionError(f"detector size {height * width} exceeds maximum {MAX_DIM}")
    return ScatterModel(n_modes, height, width, model_seed)


@dataclass(frozen=True)
class StimulusSpec:
    """Contact along the sensing strip plus an optional texture signature."""

    position: float
    depth: float
    kernel_width: float = 0.05
    texture_seed: int | None = None
    texture_gain: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.position <= 1.0:
            raise ConfigError(f"position must be in [0, 1], got {self.position}")
        if self.depth < 0:
            raise ConfigError(f"depth must be nonnegative, got {self.depth}")
        if self.kernel_width <= 0:
            raise ConfigError(f"kernel width must be positive, got {self.kernel_width}")
        if self.texture_gain < 0:
            raise ConfigError(f"texture gain must be nonnegative, got {self.texture_gain}")
        if self.texture_gain > 0 and self.texture_seed is None:
            raise ConfigError("texture_gain > 0 requires a texture_seed")


def phase_perturbation(model: ScatterModel, stimulus: StimulusSpec) -> np.ndarray:
    """Per-mode phase shift: Gaussian bump at the contact position plus the
    texture's fixed random signature. Zero stimulus -> zero perturbation."""
    m = model.n_modes
    delta = np.zeros(m, dtype=np.float64)
    if stimulus.depth > 0:
        k_axis = np.arange(m, dtype=np.float64) / m
        delta += stimulus.depth * np.exp(
            -((k_axis - stimulus.position) ** 2) / (2.0 * stimulus.kernel_width**2)
        )
    if stimulus.texture_gain > 0:
        g = philox_stream(derive_key(stimulus.texture_seed, "texture"))
        delta += stimulus.texture_gain * g.standard_normal(m)
    return delta


@dataclass(frozen=True)
class DriftState:
    """Accumulated environmental phase; a per-mode random walk."""

    phase_offset: np.ndarray
    drift_rate: float
    step_count: int
    drift_seed: int

    def __post_init__(self):
        if self.drift_rate < 0:
            raise ConfigError(f"drift rate must be nonnegative, got {self.drift_rate}")
        if self.step_count < 0:
            raise ConfigError(f"step count must be nonnegative, got {self.step_count}")
        offset = np.ascontiguousarray(self.phase_offset, dtype=np.float64)
        offset.setflags(write=False)
        object.__setattr__(self, "phase_offset", offset)

    @property
    def n_modes(self) -> int:
        return self.phase_offset.size


def initial_drift(n_modes: int, drift_rate: float, drift_seed: int) -> DriftState:
    return DriftState(np.zeros(n_modes), drift_rate, 0, drift_seed)


def advance_drift(drift: DriftState, k_steps: int) -> DriftState:
    """Advance the random walk; increments are keyed by absolute step index,
    so advancing k then j steps equals advancing k + j in one go, bit-exact."""
    if k_steps < 0:
        raise ConfigError(f"cannot advance by {k_steps} steps")
    if k_steps == 0:
        return drift
    if drift.drift_rate == 0.0:
        return DriftState(
            drift.phase_offset, drift.drift_rate, drift.step_count + k_steps, drift.drift_seed
        )
    offset = drift.phase_offset.copy()
    for step in range(drift.step_count, drift.step_count + k_steps):
        g = philox_stream(derive_key(drift.drift_seed, "drift-step", step))
        offset += drift.drift_rate * g.standard_normal(offset.size)
    return DriftState(offset, drift.drift_rate, drift.step_count + k_steps, drift.drift_seed)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian read noise, sigma relative to the frame's mean
    intensity; zero sigma leaves the frame fully determined by (model,
    stimulus, drift)."""

    read_noise_sigma: float = 0.0

    def __post_init__(self):
        if self.read_noise_sigma < 0:
            raise ConfigError(
                f"read noise sigma must be nonnegative, got {self.read_noise_sigma}"
            )


def render_batch(
    model: ScatterModel,
    mode_phases: np.ndarray,
    noise: NoiseSpec,
    frame_seeds: list[int],
) -> list[SpeckleFrame]:
    """Render frames for a (B, M) matrix of total mode phases in one gemm."""
    if mode_phases.ndim != 2 or mode_phases.shape[1] != model.n_modes:
        raise DimensionError(
            f"mode phases shape {mode_phases.shape} does not match {model.n_modes} modes"
        )
    if mode_phases.shape[0] != len(frame_seeds):
        raise DimensionError("one frame seed required per rendered frame")
    modes = np.exp(1j * mode_phases).astype(np.complex64).T  # (M, B)
    field = model.transmission @ modes  # (D, B) complex64
    intensity = np.abs(field).astype(np.float64) ** 2
    frames = []
    for b, seed in enumerate(frame_seeds):
        i = intensity[:, b]
        if noise.read_noise_sigma > 0:
            g = philox_stream(derive_key(seed, "read-noise"))
            i = i + noise.read_noise_sigma * i.mean() * g.standard_normal(i.size)
            np.clip(i, 0.0, None, out=i)
        scale_ref = np.percentile(i, _QUANT_PERCENTILE)
        if scale_ref <= 0:
            raise DegenerateDataError("frame intensity is all zero")
        pixels = np.minimum(np.round(i * (_QUANT_MAX / scale_ref)), _QUANT_MAX)
        frames.append(
            SpeckleFrame(pixels.astype(np.uint16).reshape(model.height, model.width))
        )
    return frames


def render_frame(
    model: ScatterModel,
    stimulus: StimulusSpec,
    drift: DriftState,
    noise: NoiseSpec,
    frame_seed: int,
) -> SpeckleFrame:
    """Render one frame; deterministic in the full argument tuple."""
    if drift.n_modes != model.n_modes:
        raise DimensionError(
            f"drift tracks {drift.n_modes} modes, model has {model.n_modes}"
        )
    phases = model.base_phase + drift.phase_offset + phase_perturbation(model, stimulus)
    return render_batch(model, phases[None, :], noise, [frame_seed])[0]
