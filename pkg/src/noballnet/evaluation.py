"""K-fold cross-validation, confusion matrices and the per-fold metrics report.

``noball`` is the positive class throughout.  Metric values are percentages
kept unrounded internally; rounding (half away from zero) happens only when a
report is written.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import asdict, dataclass, fields, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence, TextIO

import numpy as np

from .backbone import BackboneModel, build_backbone
from .data import ClassLabel, DatasetManifest, iter_images
from .errors import (
    EmptyInputError,
    FoldError,
    InfeasibleError,
    NoballError,
    ShapeError,
    UndefinedMetricError,
)
from .rng import derive_seed, seed_rng
from .training import TrainConfig, TrainingTrace, fit_head, image_features

METRIC_NAMES = (
    "recall",
    "false_positive_rate",
    "specificity",
    "precision",
    "f_measure",
    "accuracy",
)
REPORT_HEADER = ["iteration", *METRIC_NAMES]
DEFAULT_BACKBONE_SEED = 42


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: np.ndarray  # fold index per example

    def fold(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == i)

    def complement(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != i)

    @property
    def sizes(self) -> list[int]:
        return np.bincount(self.assignment, minlength=self.k).tolist()


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsRow:
    """Six percentages; ``None`` marks a metric whose denominator was zero."""

    recall: float | None
    false_positive_rate: float | None
    specificity: float | None
    precision: float | None
    f_measure: float | None
    accuracy: float | None

    def values(self) -> list[float | None]:
        return [getattr(self, name) for name in METRIC_NAMES]

    def rounded(self) -> dict[str, int | None]:
        return {name: round_half_away(getattr(self, name)) for name in METRIC_NAMES}


def round_half_away(value: float | None) -> int | None:
    if value is None:
        return None
    return int(Decimal(value).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def make_folds(n: int, k: int, seed: int) -> FoldPlan:
    """Seeded shuffle, then round-robin assignment: fold sizes differ by at most one."""
    if k < 2:
        raise InfeasibleError(f"need at least 2 folds, got k={k}")
    if k > n:
        raise InfeasibleError(f"cannot split {n} examples into {k} folds")
    order = seed_rng(seed).permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % k
    return FoldPlan(k, assignment)


def confusion(predictions: Sequence[int], truth: Sequence[int]) -> ConfusionMatrix:
    pred = np.asarray([int(p) for p in predictions])
    true = np.asarray([int(t) for t in truth])
    if pred.shape != true.shape:
        raise ShapeError(f"{len(pred)} predictions vs {len(true)} ground-truth labels")
    if pred.size == 0:
        raise EmptyInputError("confusion matrix of zero examples")
    pos, neg = int(ClassLabel.NOBALL), int(ClassLabel.LEGAL)
    return ConfusionMatrix(
        tp=int(np.sum((pred == pos) & (true == pos))),
        fp=int(np.sum((pred == pos) & (true == neg))),
        tn=int(np.sum((pred == neg) & (true == neg))),
        fn=int(np.sum((pred == neg) & (true == pos))),
    )


def _pct(num: int, den: int) -> float | None:
    return 100.0 * num / den if den > 0 else None


def metrics(cm: ConfusionMatrix) -> MetricsRow:
    recall = _pct(cm.tp, cm.tp + cm.fn)
    fpr = _pct(cm.fp, cm.fp + cm.tn)
    precision = _pct(cm.tp, cm.tp + cm.fp)
    if recall is None or precision is None:
        f_measure = None
    elif precision + recall == 0:
        f_measure = 0.0
    else:
        f_measure = 2 * precision * recall / (precision + recall)
    return MetricsRow(
        recall=recall,
        false_positive_rate=fpr,
        # complement of fpr so the two always sum to exactly 100
        specificity=None if fpr is None else 100.0 - fpr,
        precision=precision,
        f_measure=f_measure,
        accuracy=_pct(cm.tp + cm.tn, cm.total),
    )


def macro_average(rows: Sequence[MetricsRow]) -> MetricsRow:
    if not rows:
        raise EmptyInputError("macro average of zero rows")
    means = {}
    for name in METRIC_NAMES:
        column = [getattr(r, name) for r in rows]
        if any(v is None for v in column):
            raise UndefinedMetricError(f"{name} is undefined in at least one row")
        means[name] = float(np.mean(column))
    return MetricsRow(**means)


@dataclass
class CrossvalResult:
    rows: list[MetricsRow]
    macro: MetricsRow
    traces: list[TrainingTrace]
    confusions: list[ConfusionMatrix]
    plan: FoldPlan


def crossval_features(
    features: np.ndarray, labels: Sequence[int], k: int, train_config: TrainConfig, seed: int
) -> CrossvalResult:
    labels = np.asarray([int(l) for l in labels], dtype=np.int64)
    plan = make_folds(len(labels), k, seed)
    rows, traces, cms = [], [], []
    for i in range(k):
        try:
            test_idx, train_idx = plan.fold(i), plan.complement(i)
            cfg = replace(train_config, seed=derive_seed(seed, i))
            head, trace = fit_head(features[train_idx], labels[train_idx], cfg)
            preds = head.probabilities(features[test_idx]).argmax(axis=1)
            cm = confusion(preds, labels[test_idx])
        except NoballError as exc:
            raise FoldError(i, exc) from exc
        rows.append(metrics(cm))
        traces.append(trace)
        cms.append(cm)
    return CrossvalResult(rows, macro_average(rows), traces, cms, plan)


def run_crossval(
    manifest: DatasetManifest,
    k: int,
    train_config: TrainConfig,
    seed: int,
    backbone: BackboneModel | None = None,
) -> CrossvalResult:
    """Train on k-1 folds and test on the held-out fold, for every fold."""
    if backbone is None:
        backbone = build_backbone(DEFAULT_BACKBONE_SEED)
    images = list(iter_images(manifest))
    features = image_features(backbone, [item.pixels for item in images])
    return crossval_features(features, [item.label for item in images], k, train_config, seed)


# --- report ---------------------------------------------------------------


def _csv_cell(value: int | None) -> str:
    return "" if value is None else str(value)


def render_report(rows: Sequence[MetricsRow], macro: MetricsRow, fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for i, row in enumerate(rows, start=1):
            writer.writerow([i, *(_csv_cell(v) for v in row.rounded().values())])
        writer.writerow(["macro", *(_csv_cell(v) for v in macro.rounded().values())])
        return buf.getvalue()
    if fmt == "json":
        doc = {
            "folds": [
                {"iteration": i, **asdict(row), "rounded": row.rounded()}
                for i, row in enumerate(rows, start=1)
            ],
            "macro": {**asdict(macro), "rounded": macro.rounded()},
        }
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"unknown report format {fmt!r}; expected 'csv' or 'json'")


def emit_report(
    rows: Sequence[MetricsRow],
    macro: MetricsRow,
    sink: str | os.PathLike | TextIO,
    fmt: str = "csv",
) -> None:
    text = render_report(rows, macro, fmt)
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sink.write(text)


def parse_json_report(text: str) -> tuple[list[MetricsRow], MetricsRow]:
    doc = json.loads(text)
    names = [f.name for f in fields(MetricsRow)]
    rows = [MetricsRow(**{n: fold[n] for n in names}) for fold in doc["folds"]]
    return rows, MetricsRow(**{n: doc["macro"][n] for n in names})
