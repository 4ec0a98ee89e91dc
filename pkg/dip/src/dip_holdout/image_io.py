"""Image loading/saving as float arrays in [0, 1], plus PSNR."""

from __future__ import annotations

from importlib import resources

import numpy as np
from PIL import Image

__all__ = ["load_image", "save_image", "default_image_path", "psnr", "mse"]


def default_image_path() -> str:
    """Bundled 256x256 grayscale test image (NASA astronaut portrait via
    scikit-image, public domain).  Any image path can be substituted."""
    return str(resources.files("dip_holdout").joinpath("assets/astronaut_256.png"))


def load_image(path, size: int | None = None, grayscale: bool = True) -> np.ndarray:
    img = Image.open(path)
    img = img.convert("L" if grayscale else "RGB")
    if size is not None and (img.width, img.height) != (size, size):
        img = img.resize((size, size), Image.BICUBIC)
    arr = np.asarray(img, dtype=np.float64) / 255.0
    return np.clip(arr, 0.0, 1.0)


def save_image(arr: np.ndarray, path) -> None:
    data = np.clip(np.round(np.asarray(arr) * 255.0), 0, 255).astype(np.uint8)
    mode = "L" if data.ndim == 2 else "RGB"
    Image.fromarray(data, mode=mode).save(path)


def mse(a: np.ndarray, b: np.ndarray) -> float:
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.mean(diff * diff))


def psnr(restored: np.ndarray, clean: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for images in [0, 1]."""
    err = mse(restored, clean)
    if err == 0:
        return float("inf")
    return float(-10.0 * np.log10(err))
