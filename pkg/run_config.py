"""
Run configuration for the Geoseg command line.

A ``RunConfig`` is one flat set of settings covering the architecture,
training, dataset, visualization and benchmark. Values come from a flat
JSON config file overridden by command-line flags; every field has a
default and unknown keys are rejected.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Type, TypeVar, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from bench import BenchSettings
from errors import GeosegError
from trainer import TrainingConfig
from zoo import ArchitectureConfig

logger = logging.getLogger(__name__)

DEVICE_ENV = "GEOSEG_DEVICE"
RESOLVED_NAME = "resolved_config.json"


def default_device() -> str:
    load_dotenv()
    return os.getenv(DEVICE_ENV, "cpu")


SectionT = TypeVar("SectionT", bound=BaseModel)


def _section(model: Type[SectionT], **values: Any) -> SectionT:
    """Build one section model, reporting its validation errors as invalid-config."""
    try:
        return model(**values)
    except ValidationError as e:
        raise GeosegError("invalid-config", str(e)) from e


class RunConfig(BaseModel):
    """Merged settings of one command invocation."""

    model_config = ConfigDict(extra="forbid")

    # Architecture
    model: str = "UNet"
    base_channels: int = Field(64, ge=4)
    leaky_slope: float = Field(0.1, gt=0, lt=1)
    mc_head_weights: Optional[List[float]] = None
    br_loss_weights: Tuple[float, float] = (0.5, 0.5)
    use_bn: Optional[bool] = None

    # Training
    learning_rate: float = Field(2e-4, gt=0)
    betas: Tuple[float, float] = (0.9, 0.999)
    batch_size: int = Field(24, ge=1)
    iterations: int = Field(5000, ge=1)
    eval_every: int = Field(100, ge=1)
    threshold: float = Field(0.5, gt=0, lt=1)
    seed: int = 0
    device: str = Field(default_factory=default_device)

    # Directories
    data_dir: Path = Path("dataset")
    log_dir: Path = Path("logs")
    checkpoint_dir: Path = Path("checkpoints")
    result_dir: Path = Path("result")

    # Tiling
    tile_size: int = Field(224, ge=32)
    stride: Optional[int] = Field(None, ge=1)
    min_coverage: float = Field(0.05, ge=0, le=1)
    val_fraction: float = Field(0.3, ge=0, le=1)

    # Visualization
    samples: int = Field(8, ge=1)
    canny_low: float = Field(50.0, gt=0)
    canny_high: float = Field(100.0, gt=0)
    canny_sigma: float = Field(1.4, gt=0)

    # Benchmark
    bench_batch_size: int = Field(24, ge=1)
    warmup_iters: int = Field(5, ge=0)
    timed_iters: int = Field(50, ge=1)
    bench_image_size: int = Field(224, ge=32, multiple_of=32)

    def architecture(self, family: Optional[str] = None) -> ArchitectureConfig:
        """The architecture part of the config."""
        return _section(
            ArchitectureConfig,
            family=family or self.model,
            base_channels=self.base_channels,
            leaky_slope=self.leaky_slope,
            mc_head_weights=self.mc_head_weights,
            br_loss_weights=self.br_loss_weights,
            use_bn=self.use_bn,
        )

    def training(self) -> TrainingConfig:
        """The training part of the config; directories are per model."""
        return _section(
            TrainingConfig,
            learning_rate=self.learning_rate,
            betas=self.betas,
            batch_size=self.batch_size,
            iterations=self.iterations,
            eval_every=self.eval_every,
            threshold=self.threshold,
            seed=self.seed,
            device=self.device,
            checkpoint_dir=self.checkpoint_dir / self.model,
            log_dir=self.log_dir / self.model,
        )

    def bench(self) -> BenchSettings:
        return _section(
            BenchSettings,
            batch_size=self.bench_batch_size,
            warmup_iters=self.warmup_iters,
            timed_iters=self.timed_iters,
            image_size=self.bench_image_size,
            base_channels=self.base_channels,
            seed=self.seed,
            device=self.device,
        )


def read_config_file(config_file: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a flat JSON config file.

    Args:
        config_file: Path to a JSON object of key -> scalar or list

    Returns:
        The key/value pairs
    """
    path = Path(config_file)
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise GeosegError("invalid-config", f"config file {path} not found") from e
    except json.JSONDecodeError as e:
        raise GeosegError("invalid-config", f"config file {path} is not valid JSON: {e}") from e

    if not isinstance(data, dict):
        raise GeosegError("invalid-config", f"config file {path} must hold a JSON object")
    nested = sorted(k for k, v in data.items() if isinstance(v, dict))
    if nested:
        raise GeosegError("invalid-config", f"config file must be flat; nested keys: {', '.join(nested)}")
    return data


def load_run_config(config_file: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Resolve a RunConfig with flag > config file > default precedence.

    Args:
        config_file: Optional flat JSON config file
        overrides: Values given on the command line; None means "not given"

    Returns:
        The validated config
    """
    merged: Dict[str, Any] = {}
    if config_file is not None:
        merged.update(read_config_file(config_file))
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})

    try:
        return RunConfig(**merged)
    except ValidationError as e:
        raise GeosegError("invalid-config", str(e)) from e


def save_resolved(config: RunConfig, directory: Union[str, Path]) -> Path:
    """Echo the fully resolved config into a run directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / RESOLVED_NAME
    with open(path, "w") as f:
        f.write(config.model_dump_json(indent=2))
    logger.debug(f"Wrote resolved config to {path}")
    return path
