"""
SegNet: a VGG-16 encoder whose decoder upsamples with max-unpooling,
reusing the argmax indices recorded by the matching pooling layer.
"""

from typing import Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from zoo.blocks import BatchOutput, ConvBlock, SegmentationNet, stage_widths

ENCODER_DEPTHS = (2, 2, 3, 3, 3)


def pool_with_indices(x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """2x2 max pooling that also returns the flat argmax index of each window."""
    return F.max_pool2d(x, kernel_size=2, stride=2, return_indices=True)


def unpool(x: torch.Tensor, indices: torch.Tensor, size: torch.Size) -> torch.Tensor:
    """Place every value at its recorded argmax position; other positions are zero."""
    return F.max_unpool2d(x, indices, kernel_size=2, stride=2, output_size=size)


class SegNet(SegmentationNet):

    family = "SegNet"

    def __init__(self, config, use_bn: bool):
        super().__init__(config)
        widths = stage_widths(config.base_channels)

        in_ch = 3
        for i, (width, depth) in enumerate(zip(widths, ENCODER_DEPTHS), start=1):
            setattr(self, f"enc{i}", ConvBlock(in_ch, width, depth, use_bn))
            in_ch = width

        # Mirror of the encoder: dec{i} runs after unpooling to enc{i}'s size
        # and ends with the channel count enc{i} received.
        for i in range(5, 0, -1):
            width = widths[i - 1]
            out_ch = widths[i - 2] if i > 1 else widths[0]
            depth = ENCODER_DEPTHS[i - 1]
            layers = ConvBlock(width, width, depth - 1, use_bn) if depth > 1 else nn.Identity()
            setattr(self, f"dec{i}", nn.Sequential(
                layers,
                ConvBlock(width, out_ch, 1, use_bn),
            ))
        self.head = nn.Conv2d(widths[0], 1, 3, padding=1)

    def forward(self, x: torch.Tensor) -> BatchOutput:
        records = []
        h = x
        for i in range(1, 6):
            h = getattr(self, f"enc{i}")(h)
            size = h.shape
            h, indices = pool_with_indices(h)
            records.append((indices, size))

        for i in range(5, 0, -1):
            indices, size = records[i - 1]
            h = unpool(h, indices, size)
            h = getattr(self, f"dec{i}")(h)
        return BatchOutput.from_logits(self.head(h))
