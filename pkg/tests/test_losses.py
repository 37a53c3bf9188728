import math

import numpy as np
import pytest
import torch

from errors import GeosegError
from zoo import ArchitectureConfig, BatchOutput, build_model, forward
from zoo.losses import bce_loss, boundary_target, br_loss, compute_loss, downsample_target, mc_loss


def constant(value, size):
    return torch.full((1, 1, size, size), value, dtype=torch.float64)


def test_bce_of_half_is_ln2():
    target = (torch.rand(2, 1, 8, 8) > 0.5).double()
    assert bce_loss(constant(0.5, 8).expand(2, 1, 8, 8), target).item() == pytest.approx(math.log(2), abs=1e-12)


def test_bce_shape_mismatch():
    with pytest.raises(GeosegError) as exc:
        bce_loss(constant(0.5, 8), constant(1.0, 4))
    assert exc.value.code == "shape-mismatch"


def test_downsample_target_ties_go_to_building():
    target = torch.zeros(1, 1, 4, 4, dtype=torch.float64)
    target[0, 0, :2, :2] = 1
    target[0, 0, 0, 2:] = 1  # half of the top-right block
    out = downsample_target(target, 2)
    assert out[0, 0].tolist() == [[1.0, 1.0], [0.0, 0.0]]
    assert downsample_target(target, 1) is target


def mc_outputs(values, size=8):
    scales = [8, 4, 2, 1]
    return BatchOutput(
        primary=constant(values[0], size),
        aux=[constant(v, size // s) for v, s in zip(values[1:], scales)],
        aux_scales=scales,
    )


def test_mc_loss_reduces_to_bce_with_one_weight():
    target = torch.zeros(1, 1, 8, 8, dtype=torch.float64)
    target[..., :4, :] = 1
    outputs = mc_outputs([0.3, 0.9, 0.1, 0.5, 0.7])
    loss = mc_loss(outputs, target, [1.0, 0.0, 0.0, 0.0, 0.0])
    assert loss.item() == pytest.approx(bce_loss(outputs.primary, target).item(), abs=1e-12)


def test_mc_loss_with_identical_heads_is_single_bce():
    target = torch.ones(1, 1, 8, 8, dtype=torch.float64)
    outputs = mc_outputs([0.8] * 5)
    loss = mc_loss(outputs, target, [0.2] * 5)
    assert loss.item() == pytest.approx(-math.log(0.8), abs=1e-12)


def test_mc_loss_hand_case():
    # Top-left 2x2 block of a 4x4 mask; the half-scale target is [[1, 0], [0, 0]]
    target = torch.zeros(1, 1, 4, 4, dtype=torch.float64)
    target[0, 0, :2, :2] = 1
    outputs = BatchOutput(primary=constant(0.5, 4), aux=[constant(0.25, 2)], aux_scales=[2])
    loss = mc_loss(outputs, target, [0.5, 0.5])
    aux_bce = (math.log(1 / 0.25) + 3 * math.log(1 / 0.75)) / 4
    assert loss.item() == pytest.approx(0.5 * math.log(2) + 0.5 * aux_bce, abs=1e-12)


def test_mc_loss_weight_count_mismatch():
    with pytest.raises(GeosegError) as exc:
        mc_loss(mc_outputs([0.5] * 5), torch.ones(1, 1, 8, 8, dtype=torch.float64), [0.5, 0.5])
    assert exc.value.code == "config-mismatch"


def test_boundary_of_solid_square():
    mask = np.zeros((7, 7), dtype=np.uint8)
    mask[1:6, 1:6] = 1
    edge = boundary_target(mask)
    assert edge.sum() == 16
    assert edge[2:5, 2:5].sum() == 0
    assert edge.dtype == np.uint8


def test_boundary_edge_cases():
    assert boundary_target(np.zeros((5, 5), dtype=np.uint8)).sum() == 0

    dot = np.zeros((5, 5), dtype=np.uint8)
    dot[2, 2] = 1
    assert np.array_equal(boundary_target(dot), dot)

    # Pixels beyond the image border count as background
    full = np.ones((4, 4), dtype=np.uint8)
    expected = np.ones((4, 4), dtype=np.uint8)
    expected[1:3, 1:3] = 0
    assert np.array_equal(boundary_target(full), expected)


def test_boundary_is_subset_of_mask(rng):
    mask = rng.integers(0, 2, size=(3, 16, 16)).astype(np.uint8)
    edge = boundary_target(mask)
    assert edge.shape == mask.shape
    assert np.all(edge <= mask)


def test_boundary_torch_matches_numpy(rng):
    mask = rng.integers(0, 2, size=(2, 1, 12, 12)).astype(np.float32)
    from_numpy = boundary_target(mask)
    from_torch = boundary_target(torch.from_numpy(mask))
    assert isinstance(from_torch, torch.Tensor)
    assert from_torch.dtype == torch.float32
    assert np.array_equal(from_torch.numpy(), from_numpy)


def br_outputs(mask_p, edge_p, size=8):
    return BatchOutput(primary=constant(mask_p, size), aux=[constant(edge_p, size)], aux_scales=[1])


def test_br_loss_weights_select_terms():
    target = torch.zeros(1, 1, 8, 8, dtype=torch.float64)
    target[..., 2:6, 2:6] = 1
    outputs = br_outputs(0.7, 0.2)

    mask_only = br_loss(outputs, target, (1.0, 0.0))
    assert mask_only.item() == pytest.approx(bce_loss(outputs.primary, target).item(), abs=1e-12)

    edge_only = br_loss(outputs, target, (0.0, 1.0))
    expected = bce_loss(outputs.aux[0], boundary_target(target))
    assert edge_only.item() == pytest.approx(expected.item(), abs=1e-12)

    both = br_loss(outputs, target, (0.5, 0.5))
    assert both.item() == pytest.approx(0.5 * mask_only.item() + 0.5 * edge_only.item(), abs=1e-12)


def test_br_loss_needs_one_boundary_head():
    target = torch.ones(1, 1, 8, 8, dtype=torch.float64)
    with pytest.raises(GeosegError) as exc:
        br_loss(BatchOutput(primary=constant(0.5, 8)), target, (0.5, 0.5))
    assert exc.value.code == "config-mismatch"
    with pytest.raises(GeosegError):
        br_loss(BatchOutput(primary=constant(0.5, 8), aux=[constant(0.5, 4)], aux_scales=[2]), target, (0.5, 0.5))


@pytest.mark.parametrize("family", ["UNet", "MCFCN", "BRNet"])
def test_compute_loss_dispatch(family):
    model = build_model(ArchitectureConfig(family=family, base_channels=4), seed=0)
    images = torch.rand(2, 3, 32, 32)
    target = (torch.rand(2, 1, 32, 32) > 0.5).float()
    outputs = forward(model, images)
    loss = compute_loss(model, outputs, target)
    if family == "MCFCN":
        expected = mc_loss(outputs, target, model.config.head_weights())
    elif family == "BRNet":
        expected = br_loss(outputs, target, model.config.br_loss_weights)
    else:
        expected = bce_loss(outputs.primary, target, outputs.logits[0])
    assert loss.ndim == 0
    assert loss.item() == pytest.approx(expected.item())
    assert torch.isfinite(loss)


def test_saturated_wrong_pixels_still_get_gradient():
    logits = torch.full((1, 1, 8, 8), 40.0, requires_grad=True)
    outputs = BatchOutput.from_logits(logits)
    assert torch.all(outputs.primary < 1)

    loss = bce_loss(outputs.primary, torch.zeros(1, 1, 8, 8), outputs.logits[0])
    loss.backward()
    assert math.isfinite(loss.item())
    assert torch.all(logits.grad > 0)


def test_logits_and_probabilities_agree_away_from_saturation(rng):
    logits = torch.from_numpy(rng.normal(size=(2, 1, 8, 8)))
    target = torch.from_numpy(rng.integers(0, 2, size=(2, 1, 8, 8)).astype(np.float64))
    outputs = BatchOutput.from_logits(logits, [logits[..., ::2, ::2]], [2])
    assert [x is not None for x in outputs.head_logits()] == [True, True]
    with_logits = mc_loss(outputs, target, [0.5, 0.5])
    without = mc_loss(BatchOutput(outputs.primary, outputs.aux, outputs.aux_scales), target, [0.5, 0.5])
    assert with_logits.item() == pytest.approx(without.item(), rel=1e-9)
