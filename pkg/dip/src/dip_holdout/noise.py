"""Image corruption models: clipped Gaussian noise and salt-and-pepper."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["NoiseModel", "corrupt_image"]


@dataclass(frozen=True)
class NoiseModel:
    """kind 'gaussian' with standard deviation sigma, or 'salt-pepper' with a
    fraction ratio of pixels replaced by 0 or 1."""

    kind: str
    sigma: float = 0.0
    ratio: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "salt-pepper"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "gaussian" and self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.kind == "salt-pepper" and not 0 <= self.ratio <= 1:
            raise ValueError("ratio must lie in [0, 1]")

    @staticmethod
    def parse(text: str) -> "NoiseModel":
        """'gaussian:0.1' or 'sp:0.1' / 'salt-pepper:0.1'."""
        kind, _, value = text.partition(":")
        value = float(value) if value else 0.0
        if kind in ("sp", "salt-pepper"):
            return NoiseModel("salt-pepper", ratio=value)
        if kind == "gaussian":
            return NoiseModel("gaussian", sigma=value)
        raise ValueError(f"cannot parse noise spec {text!r}")


def corrupt_image(clean: np.ndarray, noise: NoiseModel, seed: int) -> np.ndarray:
    """Corrupt a [0, 1] image.  Gaussian noise is clipped back to range;
    salt-and-pepper replaces whole pixels (all channels) by 0 or 1."""
    clean = np.asarray(clean, dtype=np.float64)
    if clean.min() < 0 or clean.max() > 1:
        raise ValueError("pixel values must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    if noise.kind == "gaussian":
        noisy = clean + noise.sigma * rng.standard_normal(clean.shape)
        return np.clip(noisy, 0.0, 1.0)
    noisy = clean.copy()
    h, w = clean.shape[:2]
    count = int(round(noise.ratio * h * w))
    flat = rng.choice(h * w, size=count, replace=False)
    values = rng.integers(0, 2, size=count).astype(np.float64)
    rows, cols = flat // w, flat % w
    noisy[rows, cols] = values if clean.ndim == 2 else values[:, None]
    return noisy
