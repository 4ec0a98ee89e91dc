"""Pixel-level train/holdout partition of a single image."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PixelSplit", "make_pixel_split"]


@dataclass(frozen=True)
class PixelSplit:
    """Boolean holdout mask over pixel positions; train pixels are its
    complement.  The two masks always partition the image."""

    holdout_mask: np.ndarray
    seed: int

    @property
    def shape(self):
        return self.holdout_mask.shape

    @property
    def train_mask(self) -> np.ndarray:
        return ~self.holdout_mask

    @property
    def holdout_fraction(self) -> float:
        return float(self.holdout_mask.mean())


def make_pixel_split(shape, holdout_fraction: float, seed: int) -> PixelSplit:
    """Sample exactly round(fraction * npixels) holdout positions uniformly
    without replacement; fraction 0 gives an empty holdout set."""
    if not 0 <= holdout_fraction < 1:
        raise ValueError("holdout fraction must lie in [0, 1)")
    h, w = shape
    count = int(round(holdout_fraction * h * w))
    mask = np.zeros(h * w, dtype=bool)
    if count:
        flat = np.random.default_rng(seed).choice(h * w, size=count, replace=False)
        mask[flat] = True
    mask = mask.reshape(h, w)
    mask.flags.writeable = False
    return PixelSplit(holdout_mask=mask, seed=seed)
