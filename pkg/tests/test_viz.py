import numpy as np
import pytest
import torch.nn as nn
from PIL import Image

import metrics
import viz
from errors import GeosegError
from zoo import BatchOutput


class FirstChannelModel(nn.Module):
    def forward(self, x):
        return BatchOutput(primary=x[:, :1])


def color_count(canvas, color):
    return int(np.all(canvas == np.array(color, dtype=np.uint8), axis=-1).sum())


def test_confusion_colors():
    pred = np.array([[1, 1], [0, 0]])
    gt = np.array([[1, 0], [1, 0]])
    canvas = viz.render_confusion(pred, gt)
    assert tuple(canvas[0, 0]) == viz.TP_COLOR
    assert tuple(canvas[0, 1]) == viz.FP_COLOR
    assert tuple(canvas[1, 0]) == viz.FN_COLOR
    assert tuple(canvas[1, 1]) == viz.TN_COLOR


def test_confusion_color_histogram_matches_counts(rng):
    for _ in range(100):
        pred = rng.integers(0, 2, size=(16, 16))
        gt = rng.integers(0, 2, size=(16, 16))
        canvas = viz.render_confusion(pred, gt)
        cm = metrics.confusion(pred, gt)
        assert color_count(canvas, viz.TP_COLOR) == cm.tp
        assert color_count(canvas, viz.FP_COLOR) == cm.fp
        assert color_count(canvas, viz.FN_COLOR) == cm.fn
        assert color_count(canvas, viz.TN_COLOR) == cm.tn


def test_confusion_shape_mismatch():
    with pytest.raises(GeosegError):
        viz.render_confusion(np.zeros((4, 4)), np.zeros((4, 3)))


def test_canny_constant_image_has_no_edges():
    assert viz.canny(np.full((64, 64), 128, dtype=np.uint8)).sum() == 0


def step_image(column=32, size=64):
    image = np.zeros((size, size), dtype=np.uint8)
    image[:, column:] = 255
    return image


def test_canny_vertical_step():
    edges = viz.canny(step_image())
    assert set(np.unique(edges)) <= {0, 1}
    for row in range(8, 56):
        cols = np.flatnonzero(edges[row])
        assert len(cols) >= 1
        assert all(30 <= c <= 33 for c in cols)


def test_canny_follows_translation():
    base = viz.canny(step_image(28))
    shifted = viz.canny(step_image(31))
    assert np.array_equal(base[8:56, 3:61], shifted[8:56, 6:64])


def test_canny_ignores_brightness_offset():
    image = np.full((64, 64), 60, dtype=np.uint8)
    image[:, 32:] = 180
    image[20:40, 10:20] = 120
    edges = viz.canny(image)
    assert edges.sum() > 0
    # Stays below 255 after the shift, so nothing clips
    assert np.array_equal(edges, viz.canny(image + 10))


def test_canny_rejects_bad_thresholds():
    image = step_image()
    with pytest.raises(GeosegError) as exc:
        viz.canny(image, low=100, high=50)
    assert exc.value.code == "invalid-thresholds"
    with pytest.raises(GeosegError):
        viz.canny(image, low=0, high=50)
    with pytest.raises(GeosegError):
        viz.canny(image, sigma=0)


def test_to_gray():
    image = np.zeros((4, 4, 3), dtype=np.uint8)
    image[..., 1] = 255
    gray = viz.to_gray(image)
    assert gray.shape == (4, 4)
    assert gray.dtype == np.uint8
    # Luma weight of green is 0.587
    assert int(gray[0, 0]) == 150


def test_mask_outline():
    mask = np.zeros((8, 8), dtype=np.uint8)
    mask[2:6, 2:6] = 1
    outline = viz.mask_outline(mask)
    assert outline.sum() == 12
    assert outline[3:5, 3:5].sum() == 0
    assert viz.mask_outline(np.zeros((8, 8))).sum() == 0


def test_overlay_and_edges_rendering():
    image = np.full((8, 8, 3), 40, dtype=np.uint8)
    mask = np.zeros((8, 8), dtype=np.uint8)
    mask[2:6, 2:6] = 1
    overlay = viz.overlay_outline(image, mask)
    assert color_count(overlay, viz.OUTLINE_COLOR) == 12
    assert np.array_equal(image, np.full((8, 8, 3), 40, dtype=np.uint8))

    edges = np.eye(8, dtype=np.uint8)
    rendered = viz.render_edges(edges)
    assert color_count(rendered, (0, 0, 0)) == 8
    assert color_count(rendered, (255, 255, 255)) == 56


def test_grid_layout():
    cells = [[np.full((4, 5, 3), 10 * (r * 3 + c + 1), dtype=np.uint8) for c in range(3)] for r in range(2)]
    canvas = viz.grid(cells)
    assert canvas.shape == (2 * 4 + 2, 3 * 5 + 4, 3)
    assert np.all(canvas[4:6] == 0)
    assert np.all(canvas[:, 5:7] == 0)
    assert np.all(canvas[6:10, 14:19] == 60)


def samples_for(tile_maker, rng, count, size):
    tiles = []
    for i in range(count):
        mask = np.zeros((size, size), dtype=np.uint8)
        mask[size // 4:size // 2, size // 4:3 * size // 4] = 1
        image = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
        image[..., 0] = np.where(mask == 1, 230, 20)
        tiles.append(tile_maker(image, mask, offset=(0, i)))
    return tiles


def test_compose_single_dimensions(tile_maker, rng):
    samples = samples_for(tile_maker, rng, 8, 224)
    canvas = viz.compose_single(samples, FirstChannelModel())
    assert canvas.shape == (4 * 224 + 3 * 2, 8 * 224 + 7 * 2, 3)
    assert canvas.dtype == np.uint8
    assert np.array_equal(canvas[:224, :224], samples[0].image)
    # The red channel reproduces the mask, so the segmentation row has no errors
    seg = canvas[2 * 226:2 * 226 + 224, :224]
    assert color_count(seg, viz.FP_COLOR) == 0
    assert color_count(seg, viz.FN_COLOR) == 0


def test_compose_comparison_rows(tile_maker, rng):
    samples = samples_for(tile_maker, rng, 2, 32)
    models = [FirstChannelModel(), FirstChannelModel(), FirstChannelModel()]
    canvas = viz.compose_comparison(samples, models)
    assert canvas.shape == (4 * 32 + 3 * 2, 2 * 32 + 2, 3)
    assert np.array_equal(canvas[:32, :32], viz.overlay_outline(samples[0].image, samples[0].mask))
    assert np.array_equal(canvas[34:66, 34:66], viz.render_confusion(samples[1].mask, samples[1].mask))


def test_compose_errors(tile_maker, rng):
    samples = samples_for(tile_maker, rng, 1, 32)
    with pytest.raises(GeosegError) as exc:
        viz.compose_comparison(samples, [FirstChannelModel()])
    assert exc.value.code == "need-multiple-models"
    with pytest.raises(GeosegError) as exc:
        viz.compose_single([], FirstChannelModel())
    assert exc.value.code == "empty-input"


def test_save_canvas_is_lossless(tmp_path, rng):
    canvas = rng.integers(0, 256, size=(10, 12, 3), dtype=np.uint8)
    path = viz.save_canvas(canvas, tmp_path / "out" / "canvas.png")
    with Image.open(path) as img:
        assert np.array_equal(np.asarray(img), canvas)
