"""
Text rendering of evaluation and benchmark results.

Tables are laid out by Jinja2 templates under ``templates/`` so the
column layout can be changed without touching the computation code.
"""

import logging
from pathlib import Path
from typing import Dict, Mapping, Sequence, Tuple

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from metrics import METRIC_NAMES, MetricsReport

logger = logging.getLogger(__name__)

BASE_DIR = Path(__file__).resolve().parent
templates = Environment(
    loader=FileSystemLoader(str(BASE_DIR / "templates")),
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
    undefined=StrictUndefined,
)

DISPLAY_NAMES = {"UNet": "U-Net", "MCFCN": "MC-FCN", "BRNet": "BR-Net"}
METRIC_HEADERS = {
    "precision": "Precision",
    "recall": "Recall",
    "overall_accuracy": "Overall Acc.",
    "f1": "F1",
    "jaccard": "Jaccard",
    "kappa": "Kappa",
}


def display_name(family: str) -> str:
    return DISPLAY_NAMES.get(family, family)


def render_metrics_table(reports: Mapping[str, MetricsReport]) -> str:
    """
    Render an aligned table of the six metrics, one row per model.

    With more than one model the best value of every metric is starred; ties
    are all starred. Zero-division flags appear as footnotes under the table.

    Args:
        reports: Model name to metrics report, in display order

    Returns:
        The table text
    """
    marked = len(reports) > 1
    best = {metric: max(getattr(r, metric) for r in reports.values()) for metric in METRIC_NAMES} if reports else {}

    rows = []
    footnotes = []
    for name, report in reports.items():
        values = []
        for metric in METRIC_NAMES:
            value = getattr(report, metric)
            cell = f"{value:.4f}"
            if marked:
                cell += "*" if value == best[metric] else " "
            values.append(cell)
        rows.append({"name": display_name(name), "values": values})
        for metric in report.flagged():
            footnotes.append(f"{display_name(name)}: {METRIC_HEADERS[metric]} had a zero denominator and is reported as 0")

    name_width = max([len("Model")] + [len(r["name"]) for r in rows])
    return templates.get_template("metrics_table.txt.j2").render(
        headers=[METRIC_HEADERS[m] for m in METRIC_NAMES],
        rows=rows,
        footnotes=footnotes,
        marked=marked,
        name_width=name_width,
        col_width=max(len(h) for h in METRIC_HEADERS.values()),
    )


def render_benchmark_table(records: Sequence, failures: Mapping[Tuple[str, str], str], parameter_counts: Dict[str, int]) -> str:
    """
    Render the FPS comparison table with the fastest model per stage starred.

    Args:
        records: BenchmarkRecords, already in table order
        failures: (family, stage) to error code for rows that failed
        parameter_counts: Trainable parameters per family

    Returns:
        The table text
    """
    fps = {(r.family, r.stage): r.fps for r in records}
    best = {}
    for stage in ("training", "testing"):
        stage_fps = {family: value for (family, s), value in fps.items() if s == stage}
        if stage_fps:
            best[stage] = max(stage_fps, key=stage_fps.get)

    families = list(dict.fromkeys([r.family for r in records] + [f for f, _ in failures]))
    rows = []
    for family in families:
        cells = []
        for stage in ("training", "testing"):
            if (family, stage) in fps:
                marker = "*" if best.get(stage) == family else " "
                cells.append(f"{fps[(family, stage)]:.1f}{marker}")
            else:
                cells.append(f"FAILED ({failures.get((family, stage), 'n/a')})")
        rows.append({
            "name": display_name(family),
            "params": f"{parameter_counts.get(family, 0) / 1e6:.2f}M",
            "cells": cells,
        })

    return templates.get_template("benchmark_table.txt.j2").render(
        rows=rows,
        name_width=max([len("Model")] + [len(r["name"]) for r in rows]),
        devices=sorted({r.device for r in records}),
        batch_sizes=sorted({r.batch_size for r in records}),
    )
