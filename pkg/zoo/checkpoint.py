"""
Checkpoint files: one archive with the architecture config as JSON text
and every parameter/buffer under ``<family>/<stage>/<layer>/<param>``.
"""

import logging
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Union

import torch
from pydantic import ValidationError

from errors import GeosegError
from zoo.factory import ArchitectureConfig, build_model

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "geoseg-checkpoint/1"
# Layer slot used when a tensor sits directly on a stage module
NO_LAYER = "_"


def qualified_name(family: str, key: str) -> str:
    """Map a state-dict key such as ``enc1.0.weight`` to ``UNet/enc1/0/weight``."""
    parts = key.split(".")
    stage, param = parts[0], parts[-1]
    layer = ".".join(parts[1:-1]) or NO_LAYER
    return f"{family}/{stage}/{layer}/{param}"


def state_key(name: str) -> str:
    """Inverse of qualified_name, dropping the family."""
    _, stage, layer, param = name.split("/")
    if layer == NO_LAYER:
        return f"{stage}.{param}"
    return f"{stage}.{layer}.{param}"


def named_tensors(model) -> Dict[str, torch.Tensor]:
    family = model.config.family
    return OrderedDict(
        (qualified_name(family, key), value.detach().cpu().clone())
        for key, value in model.state_dict().items()
    )


def save_checkpoint(model, path: Union[str, Path]) -> Path:
    """
    Write a model's config and tensors to a checkpoint file.

    Args:
        model: A zoo model
        path: Destination file

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "family": model.config.family,
        "config": model.config.model_dump_json(),
        "tensors": named_tensors(model),
    }
    torch.save(payload, path)
    logger.info(f"Saved {model.config.family} checkpoint to {path}")
    return path


def load_checkpoint(path: Union[str, Path], map_location: Union[str, torch.device] = "cpu"):
    """
    Rebuild a model from a checkpoint file.

    Args:
        path: Checkpoint file
        map_location: Device the tensors are loaded onto

    Returns:
        The restored model in evaluation mode
    """
    path = Path(path)
    if not path.exists():
        raise GeosegError("missing-checkpoint", f"no checkpoint at {path}")
    try:
        payload = torch.load(path, map_location=map_location, weights_only=True)
    except Exception as e:
        raise GeosegError("bad-checkpoint", f"file: cannot read {path}: {e}") from e

    if not isinstance(payload, dict):
        raise GeosegError("bad-checkpoint", "file: not a checkpoint archive")
    for key in ("format", "family", "config", "tensors"):
        if key not in payload:
            raise GeosegError("bad-checkpoint", f"{key}: missing")
    if payload["format"] != CHECKPOINT_FORMAT:
        raise GeosegError("bad-checkpoint", f"format: unsupported {payload['format']!r}")

    try:
        config = ArchitectureConfig.model_validate_json(payload["config"])
    except ValidationError as e:
        raise GeosegError("bad-checkpoint", f"config: {e}") from e
    if payload["family"] != config.family:
        raise GeosegError(
            "bad-checkpoint",
            f"family: header says {payload['family']!r} but config says {config.family!r}",
        )

    state = OrderedDict()
    for name, value in payload["tensors"].items():
        if not name.startswith(f"{config.family}/") or name.count("/") != 3:
            raise GeosegError("bad-checkpoint", f"tensors: unexpected name {name!r}")
        state[state_key(name)] = value

    model = build_model(config)
    expected = set(model.state_dict())
    missing = sorted(expected - set(state))
    unexpected = sorted(set(state) - expected)
    if missing or unexpected:
        raise GeosegError("bad-checkpoint", f"tensors: missing {missing}, unexpected {unexpected}")
    try:
        model.load_state_dict(state, strict=True)
    except RuntimeError as e:
        raise GeosegError("bad-checkpoint", f"tensors: {e}") from e

    model.to(map_location)
    model.eval()
    logger.info(f"Loaded {config.family} checkpoint from {path}")
    return model
