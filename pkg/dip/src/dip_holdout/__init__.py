"""Deep-image-prior denoising with pixel-holdout early stopping."""

from .image_io import default_image_path, load_image, mse, psnr, save_image
from .noise import NoiseModel, corrupt_image
from .split import PixelSplit, make_pixel_split
from .train import (
    CSV_HEADER,
    DipDivergenceError,
    DipResult,
    DipRunConfig,
    EvalRecord,
    curves_to_csv,
    train_dip,
)
from .unet import SkipUNet, make_input_noise

__version__ = "0.1.0"
