"""
Building blocks shared by the segmentation networks.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

# Outputs are kept strictly inside (0, 1)
PROB_EPS = 1e-6

# Encoder widths relative to base_channels (VGG-16 ratios)
STAGE_RATIOS = (1, 2, 4, 8, 8)


def probability(logits: torch.Tensor) -> torch.Tensor:
    return torch.sigmoid(logits).clamp(PROB_EPS, 1.0 - PROB_EPS)


@dataclass
class BatchOutput:
    """
    Primary probability map plus auxiliary heads and their scale factors.

    Networks also keep the pre-sigmoid logits of every head, primary first;
    losses read those when present because the clamped probabilities have
    zero gradient at saturated pixels.
    """

    primary: torch.Tensor
    aux: List[torch.Tensor] = field(default_factory=list)
    aux_scales: List[int] = field(default_factory=list)
    logits: List[torch.Tensor] = field(default_factory=list)

    @classmethod
    def from_logits(
        cls, primary: torch.Tensor, aux: Sequence[torch.Tensor] = (), aux_scales: Sequence[int] = ()
    ) -> "BatchOutput":
        return cls(
            primary=probability(primary),
            aux=[probability(a) for a in aux],
            aux_scales=list(aux_scales),
            logits=[primary, *aux],
        )

    def heads(self) -> List[Tuple[torch.Tensor, int]]:
        """All heads as (probabilities, scale) with the primary head first."""
        return [(self.primary, 1)] + list(zip(self.aux, self.aux_scales))

    def head_logits(self) -> List[Optional[torch.Tensor]]:
        """Logits in ``heads()`` order, or all None when they were not kept."""
        count = 1 + len(self.aux)
        if len(self.logits) == count:
            return list(self.logits)
        return [None] * count


def stage_widths(base_channels: int) -> List[int]:
    return [base_channels * r for r in STAGE_RATIOS]


def activation(leaky_slope: float = 0.0) -> nn.Module:
    if leaky_slope > 0:
        return nn.LeakyReLU(leaky_slope, inplace=True)
    return nn.ReLU(inplace=True)


def conv_unit(in_ch: int, out_ch: int, use_bn: bool, leaky_slope: float = 0.0) -> List[nn.Module]:
    """3x3 convolution, optional batch norm, activation."""
    layers: List[nn.Module] = [nn.Conv2d(in_ch, out_ch, 3, padding=1, bias=not use_bn)]
    if use_bn:
        layers.append(nn.BatchNorm2d(out_ch))
    layers.append(activation(leaky_slope))
    return layers


class ConvBlock(nn.Sequential):
    """A stack of conv units, as in one VGG stage."""

    def __init__(self, in_ch: int, out_ch: int, depth: int = 2, use_bn: bool = True, leaky_slope: float = 0.0):
        layers: List[nn.Module] = []
        for i in range(depth):
            layers.extend(conv_unit(in_ch if i == 0 else out_ch, out_ch, use_bn, leaky_slope))
        super().__init__(*layers)


class ResidualBlock(nn.Module):
    """Two conv units with an additive shortcut."""

    def __init__(self, in_ch: int, out_ch: int, use_bn: bool = True, leaky_slope: float = 0.0):
        super().__init__()
        body: List[nn.Module] = conv_unit(in_ch, out_ch, use_bn, leaky_slope)
        body.append(nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=not use_bn))
        if use_bn:
            body.append(nn.BatchNorm2d(out_ch))
        self.body = nn.Sequential(*body)

        if in_ch != out_ch:
            shortcut: List[nn.Module] = [nn.Conv2d(in_ch, out_ch, 1, bias=not use_bn)]
            if use_bn:
                shortcut.append(nn.BatchNorm2d(out_ch))
            self.shortcut = nn.Sequential(*shortcut)
        else:
            self.shortcut = nn.Identity()
        self.act = activation(leaky_slope)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.act(self.body(x) + self.shortcut(x))


def upsample_to(x: torch.Tensor, size: Sequence[int]) -> torch.Tensor:
    """Bilinear resize to a spatial size."""
    return F.interpolate(x, size=tuple(size), mode="bilinear", align_corners=False)


class SegmentationNet(nn.Module):
    """Base class of every zoo network: maps B x 3 x S x S to a BatchOutput."""

    family: str = ""
    aux_scales: Tuple[int, ...] = ()

    def __init__(self, config):
        super().__init__()
        self.config = config

    def forward(self, x: torch.Tensor) -> BatchOutput:  # pragma: no cover - abstract
        raise NotImplementedError
