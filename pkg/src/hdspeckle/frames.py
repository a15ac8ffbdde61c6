"""Speckle intensity frames: 2-D nonnegative 16-bit images."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True, eq=False)
class SpeckleFrame:
    """H x W grid of 16-bit intensities, row-major; immutable after construction."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.pixels, dtype=np.uint16)
        if arr.ndim != 2 or arr.size == 0:
            raise DimensionError(f"frame must be a nonempty 2-D array, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def pixel_count(self) -> int:
        return self.pixels.size

    def flat(self) -> np.ndarray:
        """Row-major 1-D view; index i maps to pixel (i // W, i % W)."""
        return self.pixels.reshape(-1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpeckleFrame):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )
