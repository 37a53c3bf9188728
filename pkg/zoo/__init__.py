"""
The Geoseg model zoo: nine segmentation networks behind one factory.
"""

from zoo.blocks import BatchOutput, SegmentationNet
from zoo.checkpoint import load_checkpoint, save_checkpoint
from zoo.factory import FAMILIES, ArchitectureConfig, build_model, forward
from zoo.losses import boundary_target, br_loss, bce_loss, compute_loss, mc_loss

Model = SegmentationNet

__all__ = [
    "ArchitectureConfig",
    "BatchOutput",
    "FAMILIES",
    "Model",
    "SegmentationNet",
    "bce_loss",
    "boundary_target",
    "br_loss",
    "build_model",
    "compute_loss",
    "forward",
    "load_checkpoint",
    "mc_loss",
    "save_checkpoint",
]
