"""U-Net and SRResNet architectures for the two dispersion-learning tasks.

The U-Net maps an (m, m, 2) stack of cell mask and constant band-index
channel to one band surface: four encoder levels of two 3x3
convolutions (zero padding, batch norm, ReLU) with channel widths
128/256/512/1024 and max pooling, a two-convolution bottleneck at 2048
channels, then four decoder levels of 2x2 transposed-convolution
upsampling (channel-preserving), skip concatenation to 3d channels and
two 3x3 convolutions back to d, closed by a linear 1x1 convolution.

The SRResNet upsamples a band surface by 4x per side: a 9x9 head to 64
channels with PReLU, 16 residual blocks (3x3 conv + BN + PReLU + 3x3
conv + BN + additive skip), a post-body 3x3 conv + BN with a long skip
from the head, two pixel-shuffle upsampling stages (3x3 conv 64->256,
shuffle r=2, PReLU), and a 9x9 tail to one channel with Tanh, so
outputs are bounded and targets must be normalized accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class UNetConfig:
    m: int = 16
    in_channels: int = 2
    base_channels: int = 128  # encoder level widths: base * 2^level
    levels: int = 4

    def __post_init__(self):
        if self.m % 2**self.levels != 0:
            raise ValueError(
                f"input side {self.m} must be divisible by {2 ** self.levels}"
            )

    def level_channels(self, level: int) -> int:
        return self.base_channels * 2**level


@dataclass(frozen=True)
class SRResNetConfig:
    m_low: int = 16
    channels: int = 64
    n_blocks: int = 16
    upscale: int = 4  # two pixel-shuffle stages of factor 2

    @property
    def m_high(self) -> int:
        return self.upscale * self.m_low


def _encoder_block(c_in: int, c_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 3, padding=1),
        nn.BatchNorm2d(c_out),
        nn.ReLU(inplace=True),
        nn.Conv2d(c_out, c_out, 3, padding=1),
        nn.BatchNorm2d(c_out),
        nn.ReLU(inplace=True),
    )


def _decoder_block(c_in: int, c_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 3, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv2d(c_out, c_out, 3, padding=1),
        nn.ReLU(inplace=True),
    )


class UNet(nn.Module):
    def __init__(self, cfg: UNetConfig = UNetConfig()):
        super().__init__()
        self.cfg = cfg
        widths = [cfg.level_channels(i) for i in range(cfg.levels)]
        self.encoders = nn.ModuleList()
        c_prev = cfg.in_channels
        for width in widths:
            self.encoders.append(_encoder_block(c_prev, width))
            c_prev = width
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = _encoder_block(widths[-1], 2 * widths[-1])
        self.upsamplers = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for width in reversed(widths):
            self.upsamplers.append(
                nn.ConvTranspose2d(2 * width, 2 * width, 2, stride=2)
            )
            self.decoders.append(_decoder_block(3 * width, width))
        self.head = nn.Conv2d(widths[0], 1, 1)  # linear output

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        skips = []
        for encoder in self.encoders:
            x = encoder(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for upsample, decode, skip in zip(
            self.upsamplers, self.decoders, reversed(skips)
        ):
            x = upsample(x)
            x = decode(torch.cat([skip, x], dim=1))
        return self.head(x)


class _ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.bn1 = nn.BatchNorm2d(channels)
        self.act = nn.PReLU()
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)
        self.bn2 = nn.BatchNorm2d(channels)

    def forward(self, x):
        out = self.act(self.bn1(self.conv1(x)))
        return x + self.bn2(self.conv2(out))


class _UpsampleBlock(nn.Module):
    """Conv to 4x channels, pixel-shuffle r=2 back down, PReLU.

    The shuffle needs r^2 times the target channel count going in, so
    the stated 64-channel body widens to 256 just before each shuffle.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv2d(channels, 4 * channels, 3, padding=1)
        self.shuffle = nn.PixelShuffle(2)
        self.act = nn.PReLU()

    def forward(self, x):
        return self.act(self.shuffle(self.conv(x)))


class SRResNet(nn.Module):
    def __init__(self, cfg: SRResNetConfig = SRResNetConfig()):
        super().__init__()
        if cfg.upscale != 4:
            raise ValueError("architecture fixes the total upscale at 4")
        self.cfg = cfg
        c = cfg.channels
        self.head_conv = nn.Conv2d(1, c, 9, padding=4)
        self.head_act = nn.PReLU()
        self.body = nn.Sequential(*[_ResidualBlock(c) for _ in range(cfg.n_blocks)])
        self.post_conv = nn.Conv2d(c, c, 3, padding=1)
        self.post_bn = nn.BatchNorm2d(c)
        self.upsample = nn.Sequential(_UpsampleBlock(c), _UpsampleBlock(c))
        self.tail = nn.Conv2d(c, 1, 9, padding=4)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        head = self.head_act(self.head_conv(x))
        body = self.post_bn(self.post_conv(self.body(head)))
        return torch.tanh(self.tail(self.upsample(head + body)))


def build_unet(cfg: UNetConfig = UNetConfig()) -> UNet:
    return UNet(cfg)


def build_srresnet(cfg: SRResNetConfig = SRResNetConfig()) -> SRResNet:
    return SRResNet(cfg)


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
