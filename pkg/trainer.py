"""
Training harness for the Geoseg models.

Runs a fixed Adam protocol over a DatasetSplit, logging the loss of every
iteration and validation metrics at a fixed cadence, and writes the learning
curve and the final checkpoint.
"""

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field, field_validator

import metrics
from datakit import DatasetSplit, TileSample
from errors import DivergenceError, GeosegError
from metrics import METRIC_NAMES, MetricsReport
from zoo import compute_loss, forward, save_checkpoint

logger = logging.getLogger(__name__)

LOG_NAME = "train_log.csv"
TIMING_NAME = "timing.csv"
CURVE_NAME = "learning_curve.png"
CHECKPOINT_NAME = "final.pt"
LOG_FIELDS = ["iteration", "train_loss", *METRIC_NAMES]


class TrainingConfig(BaseModel):
    """Optimizer and schedule settings of one training run."""

    model_config = ConfigDict(extra="forbid")

    learning_rate: float = Field(2e-4, gt=0)
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = Field(1e-8, gt=0)
    batch_size: int = Field(24, ge=1)
    iterations: int = Field(5000, ge=1)
    eval_every: int = Field(100, ge=1)
    threshold: float = Field(0.5, gt=0, lt=1)
    seed: int = 0
    device: str = "cpu"
    checkpoint_dir: Path = Path("checkpoints")
    log_dir: Path = Path("logs")

    @field_validator("betas")
    @classmethod
    def _check_betas(cls, betas: Tuple[float, float]) -> Tuple[float, float]:
        if not all(0.0 <= b < 1.0 for b in betas):
            raise ValueError(f"betas must lie in [0, 1), got {betas}")
        return betas


@dataclass
class LogRow:
    iteration: int
    train_loss: float
    val_metrics: Optional[MetricsReport] = None
    wall_ms: float = 0.0


@dataclass
class TrainLog:
    """One row per iteration; validation metrics on evaluation iterations."""

    rows: List[LogRow] = field(default_factory=list)

    def append(self, row: LogRow) -> None:
        if self.rows and row.iteration <= self.rows[-1].iteration:
            raise GeosegError("invalid-log", f"iteration {row.iteration} after {self.rows[-1].iteration}")
        self.rows.append(row)

    def losses(self) -> List[float]:
        return [row.train_loss for row in self.rows]

    def validation_rows(self) -> List[LogRow]:
        return [row for row in self.rows if row.val_metrics is not None]

    def __len__(self) -> int:
        return len(self.rows)


def resolve_device(name: str) -> torch.device:
    """Map a device descriptor to a torch device, falling back to CPU."""
    if name.startswith("cuda") and not torch.cuda.is_available():
        logger.warning(f"Device {name} requested but CUDA is unavailable; using cpu")
        return torch.device("cpu")
    return torch.device(name)


def to_batch(tiles: Sequence[TileSample], device: Union[str, torch.device] = "cpu") -> Tuple[torch.Tensor, torch.Tensor]:
    """Stack tiles into B x 3 x S x S images in [0, 1] and B x 1 x S x S masks."""
    images = np.stack([t.image for t in tiles]).astype(np.float32) / 255.0
    masks = np.stack([t.mask for t in tiles]).astype(np.float32)
    return (
        torch.from_numpy(images).permute(0, 3, 1, 2).contiguous().to(device),
        torch.from_numpy(masks).unsqueeze(1).to(device),
    )


def make_optimizer(parameters, tcfg: TrainingConfig) -> torch.optim.Optimizer:
    return torch.optim.Adam(parameters, lr=tcfg.learning_rate, betas=tcfg.betas, eps=tcfg.eps)


def batch_indices(n: int, batch_size: int, seed: int) -> Iterator[np.ndarray]:
    """
    Yield batches of indices from successive seeded permutations of range(n).

    Batches wrap across epoch boundaries, so every batch has ``batch_size`` entries.
    """
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    position = 0
    while True:
        picked = []
        while len(picked) < batch_size:
            if position == n:
                order = rng.permutation(n)
                position = 0
            take = min(batch_size - len(picked), n - position)
            picked.extend(order[position:position + take])
            position += take
        yield np.asarray(picked)


def predict(model, images: Union[np.ndarray, Sequence[np.ndarray]], batch_size: int = 16) -> np.ndarray:
    """
    Primary probability maps for uint8 H x W x 3 images, in evaluation mode.

    Args:
        model: Model returning a BatchOutput
        images: N x H x W x 3 array or a list of H x W x 3 arrays
        batch_size: Images per forward pass

    Returns:
        N x H x W float array
    """
    images = np.asarray(images)
    try:
        device = next(model.parameters()).device
    except (StopIteration, AttributeError):
        device = torch.device("cpu")

    model.eval()
    outputs = []
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            chunk = images[start:start + batch_size].astype(np.float32) / 255.0
            batch = torch.from_numpy(chunk).permute(0, 3, 1, 2).contiguous().to(device)
            outputs.append(model(batch).primary[:, 0].cpu().numpy())
    return np.concatenate(outputs, axis=0)


def validate(model, samples: Sequence[TileSample], threshold: float = 0.5, batch_size: int = 16) -> MetricsReport:
    """
    Micro-averaged metrics of a model's binarized predictions over tiles.

    Args:
        model: Model to evaluate
        samples: Tiles with ground-truth masks
        threshold: Probability at or above which a pixel is a building
        batch_size: Tiles per forward pass

    Returns:
        Metrics of the global confusion matrix
    """
    if not samples:
        raise GeosegError("empty-dataset", "no samples to validate on")
    probs = predict(model, [t.image for t in samples], batch_size)
    pairs = ((p >= threshold, t.mask) for p, t in zip(probs, samples))
    return metrics.evaluate_pairs(pairs)


def train(model, split: DatasetSplit, tcfg: TrainingConfig) -> Tuple[object, TrainLog]:
    """
    Train a zoo model with Adam for a fixed number of iterations.

    Args:
        model: A model built by zoo.build_model
        split: Dataset; ``split.val`` is used for periodic validation
        tcfg: Training settings

    Returns:
        The trained model and its TrainLog
    """
    if not split.train:
        raise GeosegError("empty-dataset", "training split is empty")

    torch.manual_seed(tcfg.seed)
    device = resolve_device(tcfg.device)
    model.to(device)
    optimizer = make_optimizer(model.parameters(), tcfg)
    batches = batch_indices(len(split.train), tcfg.batch_size, tcfg.seed)

    if not split.val:
        logger.warning("Validation split is empty; no validation metrics will be logged")

    family = model.config.family
    logger.info(
        f"Training {family} for {tcfg.iterations} iterations "
        f"(batch {tcfg.batch_size}, lr {tcfg.learning_rate}, {len(split.train)} tiles, device {device})"
    )

    log = TrainLog()
    for iteration in range(1, tcfg.iterations + 1):
        started = time.perf_counter()
        images, masks = to_batch([split.train[i] for i in next(batches)], device)

        model.train()
        outputs = forward(model, images)
        loss = compute_loss(model, outputs, masks)
        if not torch.isfinite(loss):
            raise DivergenceError(iteration, float(loss.item()))
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()

        val_metrics = None
        if split.val and iteration % tcfg.eval_every == 0:
            val_metrics = validate(model, split.val, tcfg.threshold, tcfg.batch_size)
            logger.info(
                f"[{family}] iteration {iteration}: loss {loss.item():.4f}, "
                f"val jaccard {val_metrics.jaccard:.4f}, kappa {val_metrics.kappa:.4f}"
            )
        else:
            logger.debug(f"[{family}] iteration {iteration}: loss {loss.item():.4f}")

        log.append(LogRow(
            iteration=iteration,
            train_loss=float(loss.item()),
            val_metrics=val_metrics,
            wall_ms=(time.perf_counter() - started) * 1000.0,
        ))

    save_checkpoint(model, Path(tcfg.checkpoint_dir) / CHECKPOINT_NAME)
    return model, log


def write_log(log: TrainLog, log_dir: Union[str, Path]) -> Path:
    """
    Persist a TrainLog as ``train_log.csv`` plus wall times in ``timing.csv``.

    The loss/metric file holds no timings, so it is identical across
    repeated seeded runs.

    Args:
        log: The log to write
        log_dir: Destination directory

    Returns:
        Path of the loss/metric file
    """
    log_dir = Path(log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    path = log_dir / LOG_NAME
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(LOG_FIELDS)
        for row in log.rows:
            values = row.val_metrics.values() if row.val_metrics else ("",) * len(METRIC_NAMES)
            writer.writerow([row.iteration, repr(row.train_loss), *(repr(v) if v != "" else "" for v in values)])

    with open(log_dir / TIMING_NAME, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iteration", "wall_ms"])
        writer.writerows([row.iteration, f"{row.wall_ms:.3f}"] for row in log.rows)
    return path


def read_log(log_dir: Union[str, Path]) -> TrainLog:
    """Read a TrainLog written by write_log; wall times are optional."""
    log_dir = Path(log_dir)
    timings = {}
    timing_path = log_dir / TIMING_NAME
    if timing_path.exists():
        with open(timing_path, newline="") as f:
            timings = {int(r["iteration"]): float(r["wall_ms"]) for r in csv.DictReader(f)}

    log = TrainLog()
    with open(log_dir / LOG_NAME, newline="") as f:
        for record in csv.DictReader(f):
            val_metrics = None
            if record[METRIC_NAMES[0]] != "":
                val_metrics = MetricsReport(**{name: float(record[name]) for name in METRIC_NAMES})
            iteration = int(record["iteration"])
            log.append(LogRow(
                iteration=iteration,
                train_loss=float(record["train_loss"]),
                val_metrics=val_metrics,
                wall_ms=timings.get(iteration, 0.0),
            ))
    return log


def plot_learning_curve(log: TrainLog, path: Union[str, Path], title: str = "") -> Path:
    """
    Plot training loss and validation Jaccard against iteration.

    Args:
        log: The log to plot
        path: Destination PNG file
        title: Figure title

    Returns:
        The written path
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, loss_ax = plt.subplots(figsize=(10, 6))
    loss_ax.plot([r.iteration for r in log.rows], log.losses(), linewidth=1, label="train loss")
    loss_ax.set_xlabel("Iteration", fontsize=12)
    loss_ax.set_ylabel("Training Loss", fontsize=12)
    loss_ax.grid(True, alpha=0.3)

    val_rows = log.validation_rows()
    if val_rows:
        jaccard_ax = loss_ax.twinx()
        jaccard_ax.plot(
            [r.iteration for r in val_rows],
            [r.val_metrics.jaccard for r in val_rows],
            marker="o",
            color="tab:green",
            label="val jaccard",
        )
        jaccard_ax.set_ylabel("Validation Jaccard", fontsize=12)
        jaccard_ax.set_ylim(0.0, 1.0)

    loss_ax.set_title(title or "Learning Curve", fontsize=14, fontweight="bold")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
