"""
Pixel-level evaluation metrics for binary building segmentation.

Every metric is derived from a single confusion matrix of pixel counts:
precision and recall (the imbalanced metrics) plus overall accuracy, F1,
Jaccard index and Cohen's kappa (the general metrics). Metrics over many
tiles are micro-averaged: one global matrix is accumulated first.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Tuple

import numpy as np

from errors import GeosegError

logger = logging.getLogger(__name__)

# Column order of the comparison table
METRIC_NAMES = ("precision", "recall", "overall_accuracy", "f1", "jaccard", "kappa")


@dataclass(frozen=True)
class ConfusionMatrix:
    """TP/FP/FN/TN pixel counts."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise GeosegError("invalid-confusion", f"{name} must be >= 0, got {getattr(self, name)}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            tn=self.tn + other.tn,
        )


@dataclass(frozen=True)
class MetricsReport:
    """The six metrics plus a zero-division flag for each."""

    precision: float
    recall: float
    overall_accuracy: float
    f1: float
    jaccard: float
    kappa: float
    zero_division_flags: Dict[str, bool] = field(default_factory=dict)

    def values(self) -> Tuple[float, ...]:
        """Return the metrics as a sextuple in table column order."""
        return tuple(getattr(self, name) for name in METRIC_NAMES)

    def flagged(self) -> Tuple[str, ...]:
        """Names of metrics whose denominator was zero."""
        return tuple(name for name in METRIC_NAMES if self.zero_division_flags.get(name, False))

    def to_dict(self) -> Dict[str, object]:
        """
        Flatten the report into a machine-readable record.

        Returns:
            Mapping of metric name to value plus ``<metric>_zero_division`` flags
        """
        record: Dict[str, object] = {name: getattr(self, name) for name in METRIC_NAMES}
        for name in METRIC_NAMES:
            record[f"{name}_zero_division"] = bool(self.zero_division_flags.get(name, False))
        return record


def confusion(pred: np.ndarray, gt: np.ndarray) -> ConfusionMatrix:
    """
    Tally the confusion matrix of a binary prediction against ground truth.

    Args:
        pred: Binary prediction map (nonzero means building)
        gt: Binary ground-truth map of the same shape

    Returns:
        The pixel counts
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise GeosegError("shape-mismatch", f"prediction {pred.shape} vs ground truth {gt.shape}")

    p = pred != 0
    g = gt != 0
    return ConfusionMatrix(
        tp=int(np.count_nonzero(p & g)),
        fp=int(np.count_nonzero(p & ~g)),
        fn=int(np.count_nonzero(~p & g)),
        tn=int(np.count_nonzero(~p & ~g)),
    )


def _ratio(numerator: int, denominator: int) -> Tuple[float, bool]:
    if denominator == 0:
        return 0.0, True
    return numerator / denominator, False


def _check(cm: ConfusionMatrix) -> None:
    if cm.total == 0:
        raise GeosegError("empty-confusion", "confusion matrix holds no pixels")


def _precision(cm: ConfusionMatrix) -> Tuple[float, bool]:
    return _ratio(cm.tp, cm.tp + cm.fp)


def _recall(cm: ConfusionMatrix) -> Tuple[float, bool]:
    return _ratio(cm.tp, cm.tp + cm.fn)


def _overall_accuracy(cm: ConfusionMatrix) -> Tuple[float, bool]:
    return _ratio(cm.tp + cm.tn, cm.total)


def _f1(cm: ConfusionMatrix) -> Tuple[float, bool]:
    # 2PR/(P+R) reduces to 2tp/(2tp+fp+fn); P+R is zero exactly when tp is zero
    if cm.tp == 0:
        return 0.0, True
    return _ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn)


def _jaccard(cm: ConfusionMatrix) -> Tuple[float, bool]:
    return _ratio(cm.tp, cm.tp + cm.fp + cm.fn)


def _kappa(cm: ConfusionMatrix) -> Tuple[float, bool]:
    n = cm.total
    # n^2 * p_e, kept in integers so p_o == p_e yields exactly zero
    chance = (cm.tp + cm.fp) * (cm.tp + cm.fn) + (cm.fn + cm.tn) * (cm.fp + cm.tn)
    return _ratio(n * (cm.tp + cm.tn) - chance, n * n - chance)


def precision(cm: ConfusionMatrix) -> float:
    """tp / (tp + fp)."""
    _check(cm)
    return _precision(cm)[0]


def recall(cm: ConfusionMatrix) -> float:
    """tp / (tp + fn)."""
    _check(cm)
    return _recall(cm)[0]


def overall_accuracy(cm: ConfusionMatrix) -> float:
    """(tp + tn) / n."""
    _check(cm)
    return _overall_accuracy(cm)[0]


def f1(cm: ConfusionMatrix) -> float:
    """Harmonic mean of precision and recall."""
    _check(cm)
    return _f1(cm)[0]


def jaccard(cm: ConfusionMatrix) -> float:
    """tp / (tp + fp + fn), the intersection over union."""
    _check(cm)
    return _jaccard(cm)[0]


def kappa(cm: ConfusionMatrix) -> float:
    """Two-class Cohen's kappa (p_o - p_e) / (1 - p_e)."""
    _check(cm)
    return _kappa(cm)[0]


def report(cm: ConfusionMatrix) -> MetricsReport:
    """
    Compute all six metrics from one confusion matrix.

    Args:
        cm: Pixel counts with at least one pixel

    Returns:
        The metrics report; zero denominators yield 0 with the flag set
    """
    _check(cm)
    values = {}
    flags = {}
    for name, fn in (
        ("precision", _precision),
        ("recall", _recall),
        ("overall_accuracy", _overall_accuracy),
        ("f1", _f1),
        ("jaccard", _jaccard),
        ("kappa", _kappa),
    ):
        values[name], flags[name] = fn(cm)
    return MetricsReport(zero_division_flags=flags, **values)


def accumulate(pairs: Iterable[Tuple[np.ndarray, np.ndarray]]) -> ConfusionMatrix:
    """Sum the confusion matrices of many (pred, gt) pairs."""
    total = ConfusionMatrix()
    for pred, gt in pairs:
        total = total + confusion(pred, gt)
    return total


def evaluate_pairs(pairs: Iterable[Tuple[np.ndarray, np.ndarray]]) -> MetricsReport:
    """
    Micro-averaged metrics over many prediction/ground-truth pairs.

    Args:
        pairs: Iterable of (binary prediction, binary ground truth)

    Returns:
        Metrics of the single global confusion matrix
    """
    cm = accumulate(pairs)
    logger.debug(f"Accumulated confusion matrix {cm}")
    return report(cm)
