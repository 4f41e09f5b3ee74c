"""Confusion matrices, per-class precision/recall/F1, macro averages.

Counts follow the row=true, column=predicted convention. Per-class metrics
use one-vs-rest counts; any zero denominator yields 0. Macro values are
unweighted class means; overall accuracy is trace/total. Display rounds
half-up to two decimals, stored values keep full precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

import numpy as np

from .errors import ConfigError, ContractError
from .model import class_names_for

__all__ = [
    "ConfusionMatrix",
    "ClassMetrics",
    "EvalReport",
    "confusion",
    "per_class",
    "report",
    "emit",
    "report_from_json",
    "confusion_to_pgm",
    "macro_average",
    "round_half_up",
]


def round_half_up(x: float, digits: int = 2) -> float:
    q = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


def macro_average(values: Sequence[float]) -> float:
    """Unweighted mean, the macro-averaging rule."""
    if not values:
        raise ContractError("macro_average needs at least one value")
    return float(sum(values)) / len(values)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # [C, C] int64, rows = true class
    class_names: list[str]

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ContractError(
                f"confusion counts must be square, got {list(self.counts.shape)}"
            )
        if (self.counts < 0).any():
            raise ContractError("confusion counts must be non-negative")
        if len(self.class_names) != self.counts.shape[0]:
            raise ContractError(
                f"{len(self.class_names)} names for {self.counts.shape[0]} classes"
            )

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(
    trues: Sequence[int],
    preds: Sequence[int],
    n_classes: int,
    class_names: list[str] | None = None,
) -> ConfusionMatrix:
    """Count (true, predicted) pairs into a [C, C] grid."""
    if len(trues) != len(preds):
        raise ContractError(f"{len(trues)} true labels vs {len(preds)} predictions")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(trues, preds):
        if not (0 <= t < n_classes):
            raise ContractError(f"true label {t} outside [0, {n_classes})")
        if not (0 <= p < n_classes):
            raise ContractError(f"prediction {p} outside [0, {n_classes})")
        counts[t, p] += 1
    return ConfusionMatrix(counts, class_names or class_names_for(n_classes))


@dataclass
class ClassMetrics:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def per_class(cm: ConfusionMatrix) -> list[ClassMetrics]:
    """One-vs-rest counts and precision/recall/F1 per class."""
    total = cm.total
    out = []
    for c in range(cm.n_classes):
        tp = int(cm.counts[c, c])
        fp = int(cm.counts[:, c].sum()) - tp
        fn = int(cm.counts[c, :].sum()) - tp
        tn = total - tp - fp - fn
        precision = _safe_div(tp, tp + fp)
        recall = _safe_div(tp, tp + fn)
        f1 = _safe_div(2.0 * precision * recall, precision + recall)
        out.append(ClassMetrics(tp, fp, fn, tn, precision, recall, f1))
    return out


@dataclass
class EvalReport:
    confusion: ConfusionMatrix
    per_class: list[ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float


def report(cm: ConfusionMatrix) -> EvalReport:
    """Per-class metrics, macro means, and trace/total accuracy."""
    if cm.total == 0:
        raise ContractError("cannot report on an empty confusion matrix")
    metrics = per_class(cm)
    return EvalReport(
        confusion=cm,
        per_class=metrics,
        macro_precision=macro_average([m.precision for m in metrics]),
        macro_recall=macro_average([m.recall for m in metrics]),
        macro_f1=macro_average([m.f1 for m in metrics]),
        accuracy=float(np.trace(cm.counts)) / cm.total,
    )


def _emit_table(rep: EvalReport) -> str:
    width = max(len(n) for n in rep.confusion.class_names)
    width = max(width, len("macro avg"))
    lines = [f"{'Class':<{width}}  {'Prec':>6}  {'Rec':>6}  {'F1':>6}  {'Acc':>6}"]
    for name, m in zip(rep.confusion.class_names, rep.per_class):
        lines.append(
            f"{name:<{width}}  {round_half_up(m.precision):>6.2f}  "
            f"{round_half_up(m.recall):>6.2f}  {round_half_up(m.f1):>6.2f}"
        )
    lines.append(
        f"{'macro avg':<{width}}  {round_half_up(rep.macro_precision):>6.2f}  "
        f"{round_half_up(rep.macro_recall):>6.2f}  {round_half_up(rep.macro_f1):>6.2f}  "
        f"{round_half_up(rep.accuracy):>6.2f}"
    )
    return "\n".join(lines) + "\n"


def _emit_csv(rep: EvalReport) -> str:
    # confusion grid only, true-class-major rows
    return "\n".join(",".join(str(v) for v in row) for row in rep.confusion.counts) + "\n"


def _emit_json(rep: EvalReport) -> str:
    payload = {
        "class_names": rep.confusion.class_names,
        "confusion": rep.confusion.counts.tolist(),
        "per_class": [
            {
                "tp": m.tp,
                "fp": m.fp,
                "fn": m.fn,
                "tn": m.tn,
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
            }
            for m in rep.per_class
        ],
        "macro_precision": rep.macro_precision,
        "macro_recall": rep.macro_recall,
        "macro_f1": rep.macro_f1,
        "accuracy": rep.accuracy,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def emit(rep: EvalReport, fmt: str) -> str:
    """Render a report as `table`, `csv` (confusion grid), or `json`."""
    if fmt == "table":
        return _emit_table(rep)
    if fmt == "csv":
        return _emit_csv(rep)
    if fmt == "json":
        return _emit_json(rep)
    raise ConfigError(f"unknown report format {fmt!r}")


def report_from_json(text: str) -> EvalReport:
    d = json.loads(text)
    cm = ConfusionMatrix(np.array(d["confusion"], dtype=np.int64), list(d["class_names"]))
    metrics = [
        ClassMetrics(
            tp=m["tp"],
            fp=m["fp"],
            fn=m["fn"],
            tn=m["tn"],
            precision=m["precision"],
            recall=m["recall"],
            f1=m["f1"],
        )
        for m in d["per_class"]
    ]
    return EvalReport(
        confusion=cm,
        per_class=metrics,
        macro_precision=d["macro_precision"],
        macro_recall=d["macro_recall"],
        macro_f1=d["macro_f1"],
        accuracy=d["accuracy"],
    )


def confusion_to_pgm(cm: ConfusionMatrix) -> bytes:
    """Grayscale portable graymap of the counts, white = largest count."""
    counts = cm.counts
    peak = int(counts.max())
    if peak == 0:
        pixels = np.zeros_like(counts)
    else:
        pixels = (counts * 255) // peak
    lines = [f"P2 {cm.n_classes} {cm.n_classes} 255"]
    lines += [" ".join(str(int(v)) for v in row) for row in pixels]
    return ("\n".join(lines) + "\n").encode("ascii")
