"""Deep-image-prior training with pixel-holdout selection.

Fit the network output to the noisy image on train pixels only; at a fixed
cadence evaluate the holdout loss (and PSNR against the clean reference when
available), select the output image at the holdout-loss argmin, and keep the
best-PSNR image as the unobservable oracle.  Bit-exact replay across machines
is not promised (framework nondeterminism); comparisons should use dB
tolerances.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from .image_io import psnr
from .noise import NoiseModel
from .split import PixelSplit
from .unet import SkipUNet, make_input_noise

__all__ = ["DipRunConfig", "DipResult", "EvalRecord", "train_dip", "curves_to_csv",
           "CSV_HEADER", "DipDivergenceError"]

# Same column convention as the matrix-recovery trajectory CSV: val_loss is
# the holdout loss and recovery_error the full-image MSE against the clean
# reference; the three phase columns stay empty for image runs.
CSV_HEADER = [
    "t",
    "train_loss",
    "val_loss",
    "recovery_error",
    "sigma_min_signal",
    "err_norm",
    "alignment",
]


class DipDivergenceError(RuntimeError):
    """Non-finite training loss; the run is aborted."""


@dataclass(frozen=True)
class DipRunConfig:
    """Reference-matched runs use gaussian sigma in [0.1, 0.3] or salt-pepper
    ratio in [0.1, 0.5], L1/L2 loss, Adam(0.05) or SGD(5)."""

    noise: NoiseModel
    loss: str = "l2"
    optimizer: str = "adam"
    lr: float = 0.05
    iterations: int = 5000
    eval_every: int = 25
    holdout_fraction: float = 0.1
    seed: int = 0
    input_channels: int = 32
    scales: int = 5
    channels: int = 128
    skip_channels: int = 4
    input_noise_std: float = 1.0 / 30.0
    device: str = "cpu"

    def __post_init__(self):
        if self.loss not in ("l1", "l2"):
            raise ValueError(f"loss must be l1 or l2, got {self.loss!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        if self.iterations < self.eval_every:
            raise ValueError("iterations must be at least the eval cadence")


@dataclass
class EvalRecord:
    t: int
    train_loss: float
    holdout_loss: Optional[float] = None
    mse_clean: Optional[float] = None
    psnr_clean: Optional[float] = None


@dataclass
class DipResult:
    records: list = field(default_factory=list)
    final_image: np.ndarray = None
    selected_image: Optional[np.ndarray] = None
    oracle_image: Optional[np.ndarray] = None
    iter_selected: Optional[int] = None
    iter_oracle: Optional[int] = None
    psnr_selected: Optional[float] = None
    psnr_oracle: Optional[float] = None
    psnr_final: Optional[float] = None


def _to_tensor(img: np.ndarray, device) -> torch.Tensor:
    arr = np.asarray(img, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[None, None]
    else:
        arr = np.moveaxis(arr, -1, 0)[None]
    return torch.from_numpy(arr.copy()).to(device)


def _to_image(t: torch.Tensor) -> np.ndarray:
    arr = t.detach().cpu().numpy()[0]
    return arr[0] if arr.shape[0] == 1 else np.moveaxis(arr, 0, -1)


def train_dip(
    noisy_image: np.ndarray,
    split: PixelSplit,
    config: DipRunConfig,
    clean_image: Optional[np.ndarray] = None,
) -> DipResult:
    """Train on the noisy image's train pixels; return curves plus the
    holdout-selected, best-PSNR (oracle, needs clean_image) and final images."""
    if split.shape != noisy_image.shape[:2]:
        raise ValueError("pixel split shape does not match the image")
    device = torch.device(config.device)
    torch.manual_seed(config.seed)
    gen = torch.Generator(device="cpu").manual_seed(config.seed)

    channels = 1 if noisy_image.ndim == 2 else noisy_image.shape[2]
    net = SkipUNet(
        in_channels=config.input_channels,
        out_channels=channels,
        scales=config.scales,
        channels=config.channels,
        skip_channels=config.skip_channels,
    ).to(device)
    z = make_input_noise(split.shape, config.input_channels, gen).to(device)

    target = _to_tensor(noisy_image, device)
    train_mask = _to_tensor(split.train_mask.astype(np.float32), device)
    holdout_count = int(split.holdout_mask.sum())
    train_count = float(train_mask.sum()) * channels
    if holdout_count:
        holdout_mask = _to_tensor(split.holdout_mask.astype(np.float32), device)

    if config.optimizer == "adam":
        opt = torch.optim.Adam(net.parameters(), lr=config.lr)
    else:
        opt = torch.optim.SGD(net.parameters(), lr=config.lr)

    def penalty(residual, mask, count):
        masked = residual * mask
        if config.loss == "l2":
            return (masked**2).sum() / count
        return masked.abs().sum() / count

    result = DipResult()
    best_holdout = float("inf")
    best_psnr = -float("inf")

    for t in range(1, config.iterations + 1):
        opt.zero_grad()
        z_in = z
        if config.input_noise_std > 0:
            z_in = z + config.input_noise_std * torch.randn(
                z.shape, generator=gen, device="cpu"
            ).to(device)
        out = net(z_in)
        loss = penalty(out - target, train_mask, train_count)
        if not torch.isfinite(loss):
            raise DipDivergenceError(f"training loss went non-finite at iteration {t}")
        loss.backward()
        opt.step()

        if t % config.eval_every == 0 or t == config.iterations:
            with torch.no_grad():
                eval_out = net(z)
            img = np.clip(_to_image(eval_out), 0.0, 1.0)
            rec = EvalRecord(t=t, train_loss=float(loss.item()))
            if holdout_count:
                rec.holdout_loss = float(
                    penalty(eval_out - target, holdout_mask, float(holdout_count) * channels)
                )
                if rec.holdout_loss < best_holdout:
                    best_holdout = rec.holdout_loss
                    result.selected_image = img
                    result.iter_selected = t
            if clean_image is not None:
                rec.mse_clean = float(np.mean((img - clean_image) ** 2))
                rec.psnr_clean = psnr(img, clean_image)
                if rec.psnr_clean > best_psnr:
                    best_psnr = rec.psnr_clean
                    result.oracle_image = img
                    result.iter_oracle = t
            result.records.append(rec)
            result.final_image = img

    if clean_image is not None:
        result.psnr_final = psnr(result.final_image, clean_image)
        if result.selected_image is not None:
            result.psnr_selected = psnr(result.selected_image, clean_image)
        if result.oracle_image is not None:
            result.psnr_oracle = best_psnr
    return result


def curves_to_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec in records:
            writer.writerow([
                rec.t,
                format(rec.train_loss, ".17g"),
                "" if rec.holdout_loss is None else format(rec.holdout_loss, ".17g"),
                "" if rec.mse_clean is None else format(rec.mse_clean, ".17g"),
                "",
                "",
                "",
            ])
