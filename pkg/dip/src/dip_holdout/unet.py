"""Skip-connected hourglass in the style of the standard deep-image-prior
reference network.

Each level concatenates a narrow 1x1 skip branch of its input with the
output of a deeper branch (strided-conv downsample, recurse, bilinear
upsample back), then post-processes with 3x3 and 1x1 conv blocks.  Reflection
padding, BatchNorm, LeakyReLU throughout; sigmoid output head.
"""

from __future__ import annotations

import torch
from torch import nn

__all__ = ["SkipUNet", "make_input_noise"]


def _conv(in_ch, out_ch, kernel=3, stride=1):
    pad = kernel // 2
    return nn.Sequential(
        nn.ReflectionPad2d(pad) if pad else nn.Identity(),
        nn.Conv2d(in_ch, out_ch, kernel, stride=stride),
    )


def _block(in_ch, out_ch, kernel=3, stride=1):
    return nn.Sequential(
        _conv(in_ch, out_ch, kernel, stride),
        nn.BatchNorm2d(out_ch),
        nn.LeakyReLU(0.2, inplace=True),
    )


class _Level(nn.Module):
    def __init__(self, in_ch, down_ch, up_ch, skip_ch, deeper, deeper_out_ch):
        super().__init__()
        self.skip = _block(in_ch, skip_ch, kernel=1)
        self.down = nn.Sequential(
            _block(in_ch, down_ch, stride=2),
            _block(down_ch, down_ch),
        )
        self.deeper = deeper
        merged = skip_ch + deeper_out_ch
        self.post = nn.Sequential(
            nn.BatchNorm2d(merged),
            _block(merged, up_ch),
            _block(up_ch, up_ch, kernel=1),
        )

    def forward(self, x):
        s = self.skip(x)
        d = self.down(x)
        if self.deeper is not None:
            d = self.deeper(d)
        d = nn.functional.interpolate(
            d, size=s.shape[-2:], mode="bilinear", align_corners=False
        )
        return self.post(torch.cat([s, d], dim=1))


class SkipUNet(nn.Module):
    def __init__(
        self,
        in_channels: int = 32,
        out_channels: int = 1,
        scales: int = 5,
        channels: int = 128,
        skip_channels: int = 4,
    ):
        super().__init__()
        if scales < 1:
            raise ValueError("need at least one scale")
        self.scales = scales
        level = None
        deeper_out = channels  # the bottom deeper branch ends with down convs
        for i in reversed(range(scales)):
            level = _Level(
                in_ch=in_channels if i == 0 else channels,
                down_ch=channels,
                up_ch=channels,
                skip_ch=skip_channels,
                deeper=level,
                deeper_out_ch=deeper_out,
            )
            deeper_out = channels  # inner levels emit up_ch
        self.body = level
        self.head = nn.Sequential(_conv(channels, out_channels, kernel=1), nn.Sigmoid())

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        factor = 2**self.scales
        if h % factor or w % factor:
            raise ValueError(f"spatial dims {h}x{w} must be divisible by {factor}")
        return self.head(self.body(x))


def make_input_noise(shape, channels: int, generator: torch.Generator) -> torch.Tensor:
    """Fixed uniform noise input of one tenth amplitude, the usual DIP seed."""
    h, w = shape
    return 0.1 * torch.rand(1, channels, h, w, generator=generator)
