"""
Bar charts comparing models: the six metrics per model and the
training/testing throughput of a benchmark suite.
"""

import logging
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np

from bench import STAGES, BenchmarkRecord
from errors import GeosegError
from format_report import METRIC_HEADERS, display_name
from metrics import METRIC_NAMES, MetricsReport

logger = logging.getLogger(__name__)

METRICS_CHART_NAME = "metrics_comparison.png"
BENCHMARK_CHART_NAME = "benchmark.png"


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _grouped_bars(ax, groups: Sequence[str], series: Mapping[str, Sequence[float]]) -> None:
    """Draw one bar per series inside each group; NaN values leave a gap."""
    x = np.arange(len(groups))
    width = 0.8 / max(len(series), 1)
    for i, (label, values) in enumerate(series.items()):
        offset = (i - (len(series) - 1) / 2) * width
        ax.bar(x + offset, values, width, label=label)
    ax.set_xticks(x)
    ax.set_xticklabels(groups)
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend()


def _save(plt, fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    logger.info(f"Wrote chart to {path}")
    return path


def plot_metrics_comparison(reports: Mapping[str, MetricsReport], path: Union[str, Path]) -> Path:
    """
    Grouped bar chart of the six metrics, one bar per model in each group.

    Args:
        reports: Model name to metrics report, in display order
        path: Destination PNG file

    Returns:
        The written path
    """
    if not reports:
        raise GeosegError("empty-input", "no metrics reports to plot")
    series = {
        display_name(name): [getattr(report, metric) for metric in METRIC_NAMES]
        for name, report in reports.items()
    }

    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(12, 6))
    _grouped_bars(ax, [METRIC_HEADERS[m] for m in METRIC_NAMES], series)
    # Kappa can be negative
    ax.set_ylim(min(0.0, *(min(v) for v in series.values())), 1.05)
    ax.set_ylabel("Score", fontsize=12)
    ax.set_title("Metrics Comparison", fontsize=14, fontweight="bold")
    return _save(plt, fig, Path(path))


def plot_benchmark(records: Sequence[BenchmarkRecord], path: Union[str, Path]) -> Path:
    """
    Grouped bar chart of training and testing FPS per model.

    Failed measurements have no record and show up as a missing bar.

    Args:
        records: Benchmark records of one suite
        path: Destination PNG file

    Returns:
        The written path
    """
    if not records:
        raise GeosegError("empty-input", "no benchmark records to plot")
    families = list(dict.fromkeys(r.family for r in records))
    fps = {(r.family, r.stage): r.fps for r in records}
    series = {
        f"{stage.capitalize()} FPS": [fps.get((family, stage), np.nan) for family in families]
        for stage in STAGES
    }

    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(12, 6))
    _grouped_bars(ax, [display_name(f) for f in families], series)
    ax.set_ylabel("Images per Second", fontsize=12)
    batch_sizes = ", ".join(str(b) for b in sorted({r.batch_size for r in records}))
    ax.set_title(f"Throughput (batch size {batch_sizes})", fontsize=14, fontweight="bold")
    return _save(plt, fig, Path(path))
