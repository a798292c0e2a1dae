"""Edge-to-image generator and patch discriminator."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn


@dataclass
class GeneratorSpec:
    in_channels: int = 1
    out_channels: int = 1
    downsample_layers: int = 2
    resnet_blocks: int = 9
    resnet_kernel: int = 3
    dropout_p: float = 0.5
    io_kernel: int = 7
    base_width: int = 64

    def validate(self) -> None:
        if self.downsample_layers < 1 or self.resnet_blocks < 1:
            raise ValueError("need at least one downsample layer and one resnet block")
        if self.io_kernel % 2 == 0 or self.resnet_kernel % 2 == 0:
            raise ValueError("kernels must be odd")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must be in [0, 1)")

    @property
    def size_divisor(self) -> int:
        return 2 ** self.downsample_layers


@dataclass
class DiscriminatorSpec:
    in_channels: int = 2  # concatenated (edge, image) pair
    base_width: int = 64
    conv_layers: int = 5
    leaky_slope: float = 0.2

    def validate(self) -> None:
        if self.conv_layers < 2:
            raise ValueError("need at least 2 conv layers")


class ResnetBlock(nn.Module):
    def __init__(self, width: int, kernel: int, dropout_p: float):
        super().__init__()
        pad = kernel // 2
        self.block = nn.Sequential(
            nn.ReflectionPad2d(pad),
            nn.Conv2d(width, width, kernel),
            nn.InstanceNorm2d(width),
            nn.ReLU(inplace=True),
            nn.Dropout(dropout_p),
            nn.ReflectionPad2d(pad),
            nn.Conv2d(width, width, kernel),
            nn.InstanceNorm2d(width),
        )

    def forward(self, x):
        return x + self.block(x)


class Generator(nn.Module):
    """Encoder, strided downsampling, residual bottleneck, transposed-conv
    upsampling, decoder. Output through tanh, so values lie in [-1, 1]."""

    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        spec.validate()
        self.spec = spec
        w = spec.base_width
        io_pad = spec.io_kernel // 2

        layers: list[nn.Module] = [
            nn.ReflectionPad2d(io_pad),
            nn.Conv2d(spec.in_channels, w, spec.io_kernel),
            nn.InstanceNorm2d(w),
            nn.ReLU(inplace=True),
        ]
        for i in range(spec.downsample_layers):
            cin, cout = w * 2**i, w * 2 ** (i + 1)
            layers += [
                nn.Conv2d(cin, cout, 3, stride=2, padding=1),
                nn.InstanceNorm2d(cout),
                nn.ReLU(inplace=True),
            ]
        inner = w * 2**spec.downsample_layers
        layers += [ResnetBlock(inner, spec.resnet_kernel, spec.dropout_p) for _ in range(spec.resnet_blocks)]
        for i in reversed(range(spec.downsample_layers)):
            cin, cout = w * 2 ** (i + 1), w * 2**i
            layers += [
                nn.ConvTranspose2d(cin, cout, 3, stride=2, padding=1, output_padding=1),
                nn.InstanceNorm2d(cout),
                nn.ReLU(inplace=True),
            ]
        layers += [
            nn.ReflectionPad2d(io_pad),
            nn.Conv2d(w, spec.out_channels, spec.io_kernel),
            nn.Tanh(),
        ]
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        div = self.spec.size_divisor
        if x.shape[-1] % div or x.shape[-2] % div:
            raise ValueError(f"input side must be divisible by {div}, got {tuple(x.shape[-2:])}")
        return self.net(x)


def build_generator(spec: GeneratorSpec | None = None) -> Generator:
    return Generator(spec or GeneratorSpec())


class PatchDiscriminator(nn.Module):
    """Spectral-normalized conv stack on a concatenated (edge, image) pair,
    emitting a spatial grid of patch logits."""

    def __init__(self, spec: DiscriminatorSpec | None = None):
        super().__init__()
        spec = spec or DiscriminatorSpec()
        spec.validate()
        self.spec = spec
        w = spec.base_width
        sn = nn.utils.spectral_norm

        layers: list[nn.Module] = []
        cin = spec.in_channels
        for i in range(spec.conv_layers - 1):
            cout = w * 2 ** min(i, 3)
            stride = 2 if i < 3 else 1
            layers += [sn(nn.Conv2d(cin, cout, 4, stride=stride, padding=1)), nn.LeakyReLU(spec.leaky_slope, inplace=True)]
            cin = cout
        layers += [sn(nn.Conv2d(cin, 1, 4, stride=1, padding=1))]
        self.net = nn.Sequential(*layers)

    def forward(self, pair: torch.Tensor) -> torch.Tensor:
        return self.net(pair)
