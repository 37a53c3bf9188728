"""
FCN32s, FCN16s and FCN8s on a VGG-16 style encoder.

The score map at 1/32 resolution is optionally fused with scores from the
pool4 (1/16) and pool3 (1/8) stages before a final bilinear upsampling.
"""

import torch
import torch.nn as nn

from zoo.blocks import BatchOutput, ConvBlock, SegmentationNet, stage_widths, upsample_to

VGG_DEPTHS = (2, 2, 3, 3, 3)


class FCN(SegmentationNet):
    """Fully convolutional network; ``fuse_stages`` is 0, 1 or 2 skip fusions."""

    def __init__(self, config, family: str, fuse_stages: int, use_bn: bool):
        super().__init__(config)
        self.family = family
        self.fuse_stages = fuse_stages
        widths = stage_widths(config.base_channels)

        in_ch = 3
        for i, (width, depth) in enumerate(zip(widths, VGG_DEPTHS), start=1):
            setattr(self, f"enc{i}", ConvBlock(in_ch, width, depth, use_bn))
            in_ch = width
        self.pool = nn.MaxPool2d(2, 2)

        # fc6/fc7 as convolutions over the 1/32 map
        fc_width = widths[-1] * 2
        self.classifier = nn.Sequential(
            nn.Conv2d(widths[-1], fc_width, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(fc_width, fc_width, 1),
            nn.ReLU(inplace=True),
            nn.Conv2d(fc_width, 1, 1),
        )
        if fuse_stages >= 1:
            self.score_pool4 = nn.Conv2d(widths[3], 1, 1)
        if fuse_stages >= 2:
            self.score_pool3 = nn.Conv2d(widths[2], 1, 1)

    def forward(self, x: torch.Tensor) -> BatchOutput:
        size = x.shape[-2:]
        pooled = []
        h = x
        for i in range(1, 6):
            h = self.pool(getattr(self, f"enc{i}")(h))
            pooled.append(h)

        score = self.classifier(pooled[4])
        if self.fuse_stages >= 1:
            score = upsample_to(score, pooled[3].shape[-2:]) + self.score_pool4(pooled[3])
        if self.fuse_stages >= 2:
            score = upsample_to(score, pooled[2].shape[-2:]) + self.score_pool3(pooled[2])
        return BatchOutput.from_logits(upsample_to(score, size))
