"""
Feature pyramid network for binary segmentation.

A bottom-up VGG encoder feeds a top-down pathway with lateral 1x1
connections. Each pyramid level predicts its own logit map; the maps are
resized to the input size and averaged before the sigmoid.
"""

import torch
import torch.nn as nn

from zoo.blocks import BatchOutput, ConvBlock, SegmentationNet, conv_unit, stage_widths, upsample_to

PYRAMID_LEVELS = (2, 3, 4, 5)


class FPN(SegmentationNet):

    family = "FPN"

    def __init__(self, config, use_bn: bool):
        super().__init__(config)
        widths = stage_widths(config.base_channels)
        pyramid_ch = widths[1]

        in_ch = 3
        for i, width in enumerate(widths, start=1):
            setattr(self, f"enc{i}", ConvBlock(in_ch, width, 2, use_bn))
            in_ch = width
        self.pool = nn.MaxPool2d(2, 2)

        for level in PYRAMID_LEVELS:
            setattr(self, f"lateral{level}", nn.Conv2d(widths[level - 1], pyramid_ch, 1))
            setattr(self, f"smooth{level}", nn.Sequential(*conv_unit(pyramid_ch, pyramid_ch, use_bn)))
            setattr(self, f"predict{level}", nn.Sequential(
                *conv_unit(pyramid_ch, pyramid_ch, use_bn),
                nn.Conv2d(pyramid_ch, 1, 1),
            ))

    def forward(self, x: torch.Tensor) -> BatchOutput:
        size = x.shape[-2:]
        features = []
        h = x
        for i in range(1, 6):
            if i > 1:
                h = self.pool(h)
            h = getattr(self, f"enc{i}")(h)
            features.append(h)

        logits = []
        top = None
        for level in reversed(PYRAMID_LEVELS):
            lateral = getattr(self, f"lateral{level}")(features[level - 1])
            top = lateral if top is None else lateral + upsample_to(top, lateral.shape[-2:])
            pyramid = getattr(self, f"smooth{level}")(top)
            logits.append(upsample_to(getattr(self, f"predict{level}")(pyramid), size))

        fused = torch.stack(logits, dim=0).mean(dim=0)
        return BatchOutput.from_logits(fused)
