"""
Throughput benchmarking of the segmentation models.

Measures frames per second in the training stage (forward, loss, backward
and optimizer step) and the testing stage (evaluation-mode forward) on
synthetic batches, and renders the per-model comparison table.
"""

import copy
import csv
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import torch
from pydantic import BaseModel, ConfigDict, Field

from errors import DivergenceError, GeosegError
from format_report import render_benchmark_table
from trainer import TrainingConfig, make_optimizer, resolve_device
from zoo import ArchitectureConfig, build_model, compute_loss, forward

logger = logging.getLogger(__name__)

STAGES = ("training", "testing")
# Row order of the comparison table
TABLE_ORDER = ("FCN32s", "FCN16s", "FCN8s", "SegNet", "UNet", "FPN", "ResUNet", "MCFCN", "BRNet")


@dataclass(frozen=True)
class BenchmarkRecord:
    """One throughput measurement."""

    family: str
    stage: str
    fps: float
    batch_size: int
    warmup_iters: int
    timed_iters: int
    elapsed_seconds: float
    device: str

    def __post_init__(self):
        if self.timed_iters < 1:
            raise GeosegError("invalid-record", f"timed_iters must be >= 1, got {self.timed_iters}")
        if not self.fps > 0:
            raise GeosegError("invalid-record", f"fps must be > 0, got {self.fps}")


class BenchSettings(BaseModel):
    """Settings shared by every measurement of a suite."""

    model_config = ConfigDict(extra="forbid")

    batch_size: int = Field(24, ge=1)
    warmup_iters: int = Field(5, ge=0)
    timed_iters: int = Field(50, ge=1)
    image_size: int = Field(224, ge=32, multiple_of=32)
    base_channels: int = Field(64, ge=4)
    seed: int = 0
    device: str = "cpu"


@dataclass
class SuiteResult:
    records: List[BenchmarkRecord] = field(default_factory=list)
    failures: Dict[Tuple[str, str], str] = field(default_factory=dict)
    parameter_counts: Dict[str, int] = field(default_factory=dict)
    table: str = ""


def count_parameters(model) -> int:
    """Number of trainable scalars in a model."""
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def _synchronize(device: torch.device) -> None:
    if device.type == "cuda":
        torch.cuda.synchronize(device)


def _is_oom(error: BaseException) -> bool:
    oom_type = getattr(torch.cuda, "OutOfMemoryError", None)
    if oom_type is not None and isinstance(error, oom_type):
        return True
    return isinstance(error, RuntimeError) and "out of memory" in str(error).lower()


def measure(
    model,
    stage: str,
    batch_size: int,
    warmup_iters: int = 5,
    timed_iters: int = 50,
    seed: int = 0,
    image_size: int = 224,
    device: Optional[Union[str, torch.device]] = None,
) -> BenchmarkRecord:
    """
    Measure the frames per second of one model in one stage.

    The training stage runs on a copy of the model, so the caller's weights
    are left unchanged.

    Args:
        model: A zoo model
        stage: "training" or "testing"
        batch_size: Images per iteration
        warmup_iters: Untimed iterations run first
        timed_iters: Timed iterations
        seed: Seed of the synthetic batch
        image_size: Edge length of the synthetic images
        device: Device to run on; defaults to the model's device

    Returns:
        The measurement
    """
    if stage not in STAGES:
        raise GeosegError("invalid-stage", f"stage must be one of {STAGES}, got {stage!r}")
    if timed_iters < 1 or warmup_iters < 0 or batch_size < 1:
        raise GeosegError("invalid-config", "need batch_size >= 1, warmup_iters >= 0, timed_iters >= 1")

    if device is None:
        device = next(model.parameters()).device
    device = resolve_device(str(device))

    generator = torch.Generator().manual_seed(seed)
    images = torch.rand(batch_size, 3, image_size, image_size, generator=generator).to(device)
    masks = (torch.rand(batch_size, 1, image_size, image_size, generator=generator) > 0.5).float().to(device)

    if stage == "training":
        net = copy.deepcopy(model).to(device)
        net.train()
        optimizer = make_optimizer(net.parameters(), TrainingConfig())

        def step(iteration: int) -> None:
            loss = compute_loss(net, forward(net, images), masks)
            if not torch.isfinite(loss):
                raise DivergenceError(iteration, float(loss.item()))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
    else:
        net = model.to(device)
        net.eval()

        def step(iteration: int) -> None:
            with torch.no_grad():
                forward(net, images)

    try:
        for i in range(warmup_iters):
            step(i + 1)
        _synchronize(device)
        started = time.perf_counter()
        for i in range(timed_iters):
            step(warmup_iters + i + 1)
        _synchronize(device)
        elapsed = time.perf_counter() - started
    except Exception as e:
        if _is_oom(e):
            raise GeosegError("oom", f"out of memory at batch size {batch_size}") from e
        raise

    record = BenchmarkRecord(
        family=model.config.family,
        stage=stage,
        fps=(timed_iters * batch_size) / elapsed,
        batch_size=batch_size,
        warmup_iters=warmup_iters,
        timed_iters=timed_iters,
        elapsed_seconds=elapsed,
        device=str(device),
    )
    logger.info(f"{record.family} {stage}: {record.fps:.1f} FPS (batch {batch_size}, {timed_iters} iters)")
    return record


def run_suite(families: Sequence[str], settings: Optional[BenchSettings] = None) -> SuiteResult:
    """
    Benchmark every family in both stages, strictly one measurement at a time.

    A failing row is logged, recorded in ``failures`` and skipped.

    Args:
        families: Families to benchmark
        settings: Suite settings

    Returns:
        The records, failures, parameter counts and rendered table
    """
    if not families:
        raise GeosegError("empty-input", "no families to benchmark")
    settings = settings or BenchSettings()
    unknown = [f for f in families if f not in TABLE_ORDER]
    if unknown:
        raise GeosegError("unknown-architecture", f"unknown families {unknown}; valid names: {', '.join(TABLE_ORDER)}")

    result = SuiteResult()
    for family in sorted(set(families), key=TABLE_ORDER.index):
        model = build_model(ArchitectureConfig(family=family, base_channels=settings.base_channels), settings.seed)
        model.to(resolve_device(settings.device))
        result.parameter_counts[family] = count_parameters(model)
        for stage in STAGES:
            try:
                result.records.append(measure(
                    model,
                    stage,
                    settings.batch_size,
                    settings.warmup_iters,
                    settings.timed_iters,
                    settings.seed,
                    settings.image_size,
                    settings.device,
                ))
            except GeosegError as e:
                logger.warning(f"Benchmark of {family} ({stage}) failed: {e}")
                result.failures[(family, stage)] = e.code

    result.table = render_benchmark_table(result.records, result.failures, result.parameter_counts)
    return result


RECORD_FIELDS = [f.name for f in fields(BenchmarkRecord)]


def write_records(records: Sequence[BenchmarkRecord], path: Union[str, Path]) -> Path:
    """Append records to a CSV file, writing the header when the file is new."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    is_new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=RECORD_FIELDS)
        if is_new:
            writer.writeheader()
        for record in records:
            row = asdict(record)
            row["fps"] = repr(record.fps)
            row["elapsed_seconds"] = repr(record.elapsed_seconds)
            writer.writerow(row)
    return path


def read_records(path: Union[str, Path]) -> List[BenchmarkRecord]:
    """Read every record of a benchmark CSV file."""
    with open(path, newline="") as f:
        return [
            BenchmarkRecord(
                family=row["family"],
                stage=row["stage"],
                fps=float(row["fps"]),
                batch_size=int(row["batch_size"]),
                warmup_iters=int(row["warmup_iters"]),
                timed_iters=int(row["timed_iters"]),
                elapsed_seconds=float(row["elapsed_seconds"]),
                device=row["device"],
            )
            for row in csv.DictReader(f)
        ]
