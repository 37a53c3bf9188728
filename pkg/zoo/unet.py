"""
U-Net and the models built on its topology: ResUNet, MC-FCN and BR-Net.

All four share a five-stage encoder (four 2x downsamplings) and a
four-stage decoder that upsamples with transposed convolutions and
concatenates the same-resolution encoder features.
"""

from typing import List

import torch
import torch.nn as nn

from zoo.blocks import (
    BatchOutput,
    ConvBlock,
    ResidualBlock,
    SegmentationNet,
    stage_widths,
    upsample_to,
)


class UNetBackbone(nn.Module):
    """Encoder/decoder with concatenation skips; returns decoder features deepest first."""

    def __init__(self, base_channels: int, use_bn: bool, leaky_slope: float = 0.0, residual: bool = False):
        super().__init__()
        widths = stage_widths(base_channels)
        self.widths = widths

        def block(in_ch: int, out_ch: int) -> nn.Module:
            if residual:
                return ResidualBlock(in_ch, out_ch, use_bn, leaky_slope)
            return ConvBlock(in_ch, out_ch, 2, use_bn, leaky_slope)

        in_ch = 3
        for i, width in enumerate(widths, start=1):
            setattr(self, f"enc{i}", block(in_ch, width))
            in_ch = width
        self.pool = nn.MaxPool2d(2, 2)

        # dec4 works at 1/8, dec1 at full resolution
        for i in range(4, 0, -1):
            skip = widths[i - 1]
            setattr(self, f"up{i}", nn.ConvTranspose2d(widths[i], skip, 2, stride=2))
            setattr(self, f"dec{i}", block(2 * skip, skip))

    def forward(self, x: torch.Tensor) -> List[torch.Tensor]:
        skips = []
        h = x
        for i in range(1, 6):
            if i > 1:
                h = self.pool(h)
            h = getattr(self, f"enc{i}")(h)
            skips.append(h)

        features = []
        for i in range(4, 0, -1):
            h = getattr(self, f"up{i}")(h)
            h = getattr(self, f"dec{i}")(torch.cat([h, skips[i - 1]], dim=1))
            features.append(h)
        return features


class UNet(SegmentationNet):
    """Plain U-Net with one sigmoid head."""

    family = "UNet"
    residual = False

    def __init__(self, config, use_bn: bool):
        super().__init__(config)
        self.backbone = UNetBackbone(config.base_channels, use_bn, residual=self.residual)
        self.head = nn.Conv2d(self.backbone.widths[0], 1, 1)

    def forward(self, x: torch.Tensor) -> BatchOutput:
        features = self.backbone(x)
        return BatchOutput.from_logits(self.head(features[-1]))


class ResUNet(UNet):
    """U-Net whose conv blocks are residual blocks."""

    family = "ResUNet"
    residual = True


class MCFCN(SegmentationNet):
    """
    U-Net backend with one side head per decoder scale.

    Side outputs are exported as auxiliary maps at scales 8, 4, 2 and 1; the
    primary map is a learned 1x1 fusion of the side logits at full size.
    """

    family = "MCFCN"
    aux_scales = (8, 4, 2, 1)

    def __init__(self, config, use_bn: bool):
        super().__init__(config)
        self.backbone = UNetBackbone(config.base_channels, use_bn)
        widths = self.backbone.widths
        # side4 reads dec4 (1/8) ... side1 reads dec1 (full resolution)
        for i in range(4, 0, -1):
            setattr(self, f"side{i}", nn.Conv2d(widths[i - 1], 1, 1))
        self.fuse = nn.Conv2d(len(self.aux_scales), 1, 1)

    def forward(self, x: torch.Tensor) -> BatchOutput:
        size = x.shape[-2:]
        features = self.backbone(x)
        side_logits = [getattr(self, f"side{i}")(f) for i, f in zip(range(4, 0, -1), features)]
        fused = self.fuse(torch.cat([upsample_to(s, size) for s in side_logits], dim=1))
        return BatchOutput.from_logits(fused, side_logits, self.aux_scales)


class BRNet(SegmentationNet):
    """U-Net backend with LeakyReLU activations and mask + boundary heads."""

    family = "BRNet"
    aux_scales = (1,)

    def __init__(self, config, use_bn: bool):
        super().__init__(config)
        self.backbone = UNetBackbone(config.base_channels, use_bn, leaky_slope=config.leaky_slope)
        width = self.backbone.widths[0]
        self.mask_head = nn.Conv2d(width, 1, 1)
        self.boundary_head = nn.Conv2d(width, 1, 1)

    def forward(self, x: torch.Tensor) -> BatchOutput:
        shared = self.backbone(x)[-1]
        return BatchOutput.from_logits(self.mask_head(shared), [self.boundary_head(shared)], self.aux_scales)
