"""
Result visualization for the Geoseg toolkit.

Renders TP/FP/FN/TN color maps, extracts outlines from masks (inner
boundary) and from raw images (Canny), and lays them out as single-model
and multi-model comparison grids.
"""

import logging
from pathlib import Path
from typing import List, Sequence, Union

import cv2
import numpy as np
from PIL import Image

from datakit import TileSample
from errors import GeosegError
from trainer import predict
from zoo import boundary_target

logger = logging.getLogger(__name__)

TP_COLOR = (0, 255, 0)
FP_COLOR = (255, 0, 0)
FN_COLOR = (0, 0, 255)
TN_COLOR = (255, 255, 255)
OUTLINE_COLOR = (255, 255, 0)

SEPARATOR = 2
CANNY_SIGMA = 1.4
CANNY_LOW = 50.0
CANNY_HIGH = 100.0


def render_confusion(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """
    Color each pixel by its outcome: TP green, FP red, FN blue, TN white.

    Args:
        pred: Binary prediction
        gt: Binary ground truth of the same shape

    Returns:
        H x W x 3 uint8 canvas
    """
    pred = np.asarray(pred) != 0
    gt = np.asarray(gt) != 0
    if pred.shape != gt.shape:
        raise GeosegError("shape-mismatch", f"prediction {pred.shape} vs ground truth {gt.shape}")

    canvas = np.empty(pred.shape + (3,), dtype=np.uint8)
    canvas[...] = TN_COLOR
    canvas[pred & gt] = TP_COLOR
    canvas[pred & ~gt] = FP_COLOR
    canvas[~pred & gt] = FN_COLOR
    return canvas


def to_gray(image: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma of an RGB uint8 image."""
    return cv2.cvtColor(np.ascontiguousarray(image, dtype=np.uint8), cv2.COLOR_RGB2GRAY)


def canny(image: np.ndarray, low: float = CANNY_LOW, high: float = CANNY_HIGH, sigma: float = CANNY_SIGMA) -> np.ndarray:
    """
    Canny edges of an 8-bit grayscale image.

    Args:
        image: H x W uint8 grayscale image
        low: Lower hysteresis threshold on gradient magnitude
        high: Upper hysteresis threshold
        sigma: Gaussian blur width

    Returns:
        H x W binary uint8 edge map
    """
    if not (0 < low <= high) or sigma <= 0:
        raise GeosegError("invalid-thresholds", f"need high >= low > 0 and sigma > 0, got {low}, {high}, {sigma}")
    image = np.ascontiguousarray(image, dtype=np.uint8)
    blurred = cv2.GaussianBlur(image, (0, 0), sigmaX=sigma, sigmaY=sigma)
    edges = cv2.Canny(blurred, low, high, L2gradient=True)
    return (edges > 0).astype(np.uint8)


def mask_outline(mask: np.ndarray) -> np.ndarray:
    """Outline of a binary mask: the same inner boundary used as the boundary training target."""
    return boundary_target(np.asarray(mask) != 0).astype(np.uint8)


def render_edges(edges: np.ndarray) -> np.ndarray:
    """Black edge pixels on a white canvas."""
    canvas = np.full(edges.shape + (3,), 255, dtype=np.uint8)
    canvas[edges != 0] = 0
    return canvas


def overlay_outline(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """The image with the mask's outline painted on top."""
    canvas = image.copy()
    canvas[mask_outline(mask) != 0] = OUTLINE_COLOR
    return canvas


def grid(cells: Sequence[Sequence[np.ndarray]], separator: int = SEPARATOR) -> np.ndarray:
    """
    Tile equally sized RGB cells into one canvas with black separators.

    Args:
        cells: Rows of H x W x 3 cells
        separator: Separator width in pixels

    Returns:
        The composed canvas
    """
    rows, cols = len(cells), len(cells[0])
    height, width = cells[0][0].shape[:2]
    canvas = np.zeros(
        (rows * height + (rows - 1) * separator, cols * width + (cols - 1) * separator, 3),
        dtype=np.uint8,
    )
    for r, row in enumerate(cells):
        for c, cell in enumerate(row):
            if cell.shape[:2] != (height, width):
                raise GeosegError("shape-mismatch", f"cell {cell.shape[:2]} differs from {(height, width)}")
            top = r * (height + separator)
            left = c * (width + separator)
            canvas[top:top + height, left:left + width] = cell
    return canvas


def _binarized_predictions(model, samples: Sequence[TileSample], threshold: float) -> np.ndarray:
    return (predict(model, [s.image for s in samples]) >= threshold).astype(np.uint8)


def compose_single(
    samples: Sequence[TileSample],
    model,
    threshold: float = 0.5,
    low: float = CANNY_LOW,
    high: float = CANNY_HIGH,
    sigma: float = CANNY_SIGMA,
) -> np.ndarray:
    """
    Grid of one model's results, one column per sample.

    Rows, top to bottom: original image, Canny edges of the image, segmentation
    outcome colors, outline outcome colors.

    Args:
        samples: Tiles to show
        model: Model to run
        threshold: Binarization threshold
        low: Canny lower threshold
        high: Canny upper threshold
        sigma: Canny blur width

    Returns:
        The composed canvas
    """
    if not samples:
        raise GeosegError("empty-input", "no samples to visualize")
    preds = _binarized_predictions(model, samples, threshold)

    columns: List[List[np.ndarray]] = []
    for sample, pred in zip(samples, preds):
        columns.append([
            sample.image,
            render_edges(canny(to_gray(sample.image), low, high, sigma)),
            render_confusion(pred, sample.mask),
            render_confusion(mask_outline(pred), mask_outline(sample.mask)),
        ])
    rows = [list(row) for row in zip(*columns)]
    return grid(rows)


def compose_comparison(samples: Sequence[TileSample], models: Sequence, threshold: float = 0.5) -> np.ndarray:
    """
    Grid comparing several models on the same samples.

    The header row shows each image with its ground-truth outline; every
    following row holds one model's segmentation outcome colors, in the
    order of ``models``.

    Args:
        samples: Tiles to show, one per column
        models: At least two models
        threshold: Binarization threshold

    Returns:
        The composed canvas
    """
    if not samples:
        raise GeosegError("empty-input", "no samples to visualize")
    if len(models) < 2:
        raise GeosegError("need-multiple-models", f"comparison needs at least 2 models, got {len(models)}")

    rows = [[overlay_outline(s.image, s.mask) for s in samples]]
    for model in models:
        preds = _binarized_predictions(model, samples, threshold)
        rows.append([render_confusion(p, s.mask) for p, s in zip(preds, samples)])
    return grid(rows)


def save_canvas(canvas: np.ndarray, path: Union[str, Path]) -> Path:
    """Write a canvas as a lossless PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(canvas).save(path)
    logger.info(f"Wrote canvas {canvas.shape[1]}x{canvas.shape[0]} to {path}")
    return path
