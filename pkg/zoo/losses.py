"""
Loss functions: pixel BCE, the multi-constraint loss of MC-FCN and the
boundary-regulated loss of BR-Net.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F

from errors import GeosegError
from zoo.blocks import BatchOutput

ArrayLike = Union[np.ndarray, torch.Tensor]


def bce_loss(pred: torch.Tensor, target: torch.Tensor, logits: Optional[torch.Tensor] = None) -> torch.Tensor:
    """
    Mean binary cross-entropy between probabilities and a binary mask.

    Args:
        pred: Probabilities in (0, 1)
        target: Binary target of the same shape
        logits: Pre-sigmoid values behind ``pred``; when given the loss is
            computed from them directly

    Returns:
        Scalar loss
    """
    if pred.shape != target.shape:
        raise GeosegError("shape-mismatch", f"prediction {tuple(pred.shape)} vs target {tuple(target.shape)}")
    if logits is not None:
        return F.binary_cross_entropy_with_logits(logits, target.to(logits.dtype))
    return F.binary_cross_entropy(pred, target.to(pred.dtype))


def downsample_target(target: torch.Tensor, scale: int) -> torch.Tensor:
    """Area-mean a B x 1 x S x S mask by ``scale``, then threshold at 0.5 (ties go to 1)."""
    if scale == 1:
        return target
    pooled = F.avg_pool2d(target.to(torch.float64), kernel_size=scale, stride=scale)
    return (pooled >= 0.5).to(target.dtype)


def mc_loss(outputs: BatchOutput, target: torch.Tensor, weights: Sequence[float]) -> torch.Tensor:
    """
    Weighted sum of per-head BCE losses over the primary and every auxiliary head.

    Args:
        outputs: Model outputs; heads are taken primary first
        target: B x 1 x S x S binary mask
        weights: One weight per head

    Returns:
        Scalar loss
    """
    heads = outputs.heads()
    if len(weights) != len(heads):
        raise GeosegError("config-mismatch", f"{len(weights)} weights for {len(heads)} heads")

    total = outputs.primary.new_zeros(())
    for (pred, scale), logits, weight in zip(heads, outputs.head_logits(), weights):
        total = total + weight * bce_loss(pred, downsample_target(target, scale), logits)
    return total


def boundary_target(mask: ArrayLike) -> ArrayLike:
    """
    One-pixel inner boundary of a binary mask.

    A pixel is on the boundary when it is foreground and at least one of its
    4-neighbours is background; pixels outside the image count as background.

    Args:
        mask: Binary array or tensor whose last two dimensions are H x W

    Returns:
        Boundary of the same type, shape and dtype
    """
    if isinstance(mask, torch.Tensor):
        fg = mask != 0
        padded = F.pad(fg.to(torch.uint8), (1, 1, 1, 1)).bool()
        interior = padded[..., :-2, 1:-1] & padded[..., 2:, 1:-1] & padded[..., 1:-1, :-2] & padded[..., 1:-1, 2:]
        return (fg & ~interior).to(mask.dtype)

    mask = np.asarray(mask)
    fg = mask != 0
    pad_width = [(0, 0)] * (fg.ndim - 2) + [(1, 1), (1, 1)]
    padded = np.pad(fg, pad_width, constant_values=False)
    interior = padded[..., :-2, 1:-1] & padded[..., 2:, 1:-1] & padded[..., 1:-1, :-2] & padded[..., 1:-1, 2:]
    return (fg & ~interior).astype(mask.dtype)


def br_loss(outputs: BatchOutput, target: torch.Tensor, weights: Tuple[float, float]) -> torch.Tensor:
    """
    Mask BCE plus boundary BCE, as used to train BR-Net.

    Args:
        outputs: Outputs with exactly one auxiliary boundary head at scale 1
        target: B x 1 x S x S binary mask
        weights: (mask weight, boundary weight)

    Returns:
        Scalar loss
    """
    if len(outputs.aux) != 1 or list(outputs.aux_scales) != [1]:
        raise GeosegError("config-mismatch", "boundary loss needs exactly one scale-1 boundary head")
    mask_weight, boundary_weight = weights
    mask_logits, boundary_logits = outputs.head_logits()
    return (
        mask_weight * bce_loss(outputs.primary, target, mask_logits)
        + boundary_weight * bce_loss(outputs.aux[0], boundary_target(target), boundary_logits)
    )


def compute_loss(model, outputs: BatchOutput, target: torch.Tensor) -> torch.Tensor:
    """Dispatch to the loss of the model's family."""
    config = model.config
    if config.family == "MCFCN":
        return mc_loss(outputs, target, config.head_weights())
    if config.family == "BRNet":
        return br_loss(outputs, target, config.br_loss_weights)
    return bce_loss(outputs.primary, target, outputs.head_logits()[0])
