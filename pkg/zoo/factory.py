"""
Model factory for the nine segmentation families.

``build_model`` validates an ``ArchitectureConfig``, constructs the family's
network with a seeded initialization and returns it; ``forward`` runs a batch
through a model after checking the input contract.
"""

import logging
import math
from typing import Dict, List, Optional, Tuple, Type

import torch
import torch.nn as nn
from pydantic import BaseModel, ConfigDict

from errors import GeosegError
from zoo.blocks import BatchOutput, SegmentationNet
from zoo.fcn import FCN
from zoo.fpn import FPN
from zoo.segnet import SegNet
from zoo.unet import BRNet, MCFCN, ResUNet, UNet

logger = logging.getLogger(__name__)

FAMILIES: Tuple[str, ...] = (
    "FCN32s", "FCN16s", "FCN8s", "UNet", "SegNet", "FPN", "ResUNet", "MCFCN", "BRNet",
)

# Families built without batch normalization unless use_bn says otherwise
NO_BN_FAMILIES = ("FCN32s", "FCN16s", "FCN8s")

FCN_FUSIONS: Dict[str, int] = {"FCN32s": 0, "FCN16s": 1, "FCN8s": 2}

NETWORKS: Dict[str, Type[SegmentationNet]] = {
    "UNet": UNet,
    "SegNet": SegNet,
    "FPN": FPN,
    "ResUNet": ResUNet,
    "MCFCN": MCFCN,
    "BRNet": BRNet,
}

SPATIAL_MULTIPLE = 32


class ArchitectureConfig(BaseModel):
    """Model family plus every structural and loss hyperparameter."""

    model_config = ConfigDict(extra="forbid")

    family: str
    base_channels: int = 64
    leaky_slope: float = 0.1
    mc_head_weights: Optional[List[float]] = None
    br_loss_weights: Tuple[float, float] = (0.5, 0.5)
    use_bn: Optional[bool] = None

    def resolved_use_bn(self) -> bool:
        if self.use_bn is not None:
            return self.use_bn
        return self.family not in NO_BN_FAMILIES

    def head_weights(self) -> List[float]:
        """MC-FCN loss weights, primary head first; equal weights by default."""
        if self.mc_head_weights is not None:
            return list(self.mc_head_weights)
        count = 1 + len(MCFCN.aux_scales)
        return [1.0 / count] * count


def validate_config(config: ArchitectureConfig) -> None:
    """
    Check an architecture config against the family's requirements.

    Args:
        config: The config to check
    """
    if config.family not in FAMILIES:
        raise GeosegError(
            "unknown-architecture",
            f"unknown family {config.family!r}; valid names: {', '.join(FAMILIES)}",
        )
    if config.base_channels < 4:
        raise GeosegError("invalid-config", f"base_channels must be >= 4, got {config.base_channels}")
    if not 0.0 < config.leaky_slope < 1.0:
        raise GeosegError("invalid-config", f"leaky_slope must be in (0, 1), got {config.leaky_slope}")
    if any(w < 0 for w in config.br_loss_weights):
        raise GeosegError("invalid-config", f"br_loss_weights must be nonnegative, got {config.br_loss_weights}")
    if config.family == "MCFCN":
        weights = config.head_weights()
        expected = 1 + len(MCFCN.aux_scales)
        if len(weights) != expected:
            raise GeosegError("invalid-config", f"MCFCN needs {expected} head weights, got {len(weights)}")
        if any(w < 0 for w in weights) or not math.isclose(sum(weights), 1.0, abs_tol=1e-9):
            raise GeosegError("invalid-config", f"MCFCN head weights must be nonnegative and sum to 1, got {weights}")


def _init_weights(module: nn.Module) -> None:
    if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d)):
        nn.init.kaiming_uniform_(module.weight, nonlinearity="relu")
        if module.bias is not None:
            nn.init.zeros_(module.bias)
    elif isinstance(module, nn.BatchNorm2d):
        nn.init.ones_(module.weight)
        nn.init.zeros_(module.bias)


def build_model(config: ArchitectureConfig, seed: int = 0) -> SegmentationNet:
    """
    Build and initialize a segmentation network.

    Args:
        config: Architecture config naming the family
        seed: Initialization seed; equal seeds give identical parameters

    Returns:
        The initialized model, in training mode
    """
    validate_config(config)
    use_bn = config.resolved_use_bn()

    # Keep the caller's global RNG stream untouched
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        if config.family in FCN_FUSIONS:
            model = FCN(config, config.family, FCN_FUSIONS[config.family], use_bn)
        else:
            model = NETWORKS[config.family](config, use_bn)
        model.apply(_init_weights)

    logger.debug(f"Built {config.family} (base {config.base_channels}, bn={use_bn}, seed {seed})")
    return model


def forward(model: nn.Module, batch: torch.Tensor) -> BatchOutput:
    """
    Run a batch of images through a model.

    Args:
        model: A zoo model
        batch: B x 3 x S x S floats in [0, 1]; S a multiple of 32

    Returns:
        The model's BatchOutput
    """
    if batch.ndim != 4 or batch.shape[1] != 3 or batch.shape[0] < 1:
        raise GeosegError("shape-mismatch", f"expected a B x 3 x S x S batch, got {tuple(batch.shape)}")
    height, width = batch.shape[-2:]
    if height % SPATIAL_MULTIPLE or width % SPATIAL_MULTIPLE or height < 1 or width < 1:
        raise GeosegError(
            "invalid-spatial-size",
            f"spatial size {height}x{width} is not a positive multiple of {SPATIAL_MULTIPLE}",
        )
    return model(batch)
