"""Retraining of the softmax output layer on frozen backbone features."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

from . import weights as wio
from .backbone import FEATURE_DIM, BackboneModel, extract_features, load_weights, save_weights
from .data import NUM_CLASSES, ClassLabel, LabeledImage, preprocess
from .errors import ConfigError, DegenerateDataError, DivergenceError, ShapeError
from .layers import DenseLayer, dense_forward, mean_head_gradient, softmax, softmax_rows
from .rng import seed_rng
from .tensor import argmax

BACKBONE_FILE = "backbone.cnw"
HEAD_FILE = "head.cnw"
TRACE_HEADER = [
    "epoch",
    "train_accuracy",
    "validation_accuracy",
    "train_cross_entropy",
    "validation_cross_entropy",
]
_SPLIT_STREAM = -1  # never collides with an epoch number


@dataclass(frozen=True, eq=False)
class HeadModel:
    dense: DenseLayer

    def __post_init__(self):
        if self.dense.out_features != NUM_CLASSES:
            raise ShapeError(f"head must have {NUM_CLASSES} outputs, got {self.dense.out_features}")

    @classmethod
    def zeros(cls, in_features: int = FEATURE_DIM) -> "HeadModel":
        return cls(DenseLayer(np.zeros((NUM_CLASSES, in_features)), np.zeros(NUM_CLASSES)))

    def named_tensors(self) -> list[tuple[str, np.ndarray]]:
        return [("head.weights", self.dense.weights), ("head.bias", self.dense.bias)]

    def probabilities(self, features: np.ndarray) -> np.ndarray:
        """Class probabilities for a ``[batch, in_features]`` feature matrix."""
        return softmax_rows(features @ self.dense.weights.T + self.dense.bias)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    validation_fraction: float = 0.1

    def validate(self) -> None:
        if not (self.learning_rate > 0 and np.isfinite(self.learning_rate)):
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.validation_fraction < 0.5:
            raise ConfigError(f"validation_fraction must lie in [0, 0.5), got {self.validation_fraction}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_accuracy: float
    validation_accuracy: float | None
    train_cross_entropy: float
    validation_cross_entropy: float | None


@dataclass
class TrainingTrace:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.records]


def one_hot(labels: np.ndarray) -> np.ndarray:
    return np.eye(NUM_CLASSES)[np.asarray(labels, dtype=np.int64)]


def mean_cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Batch-mean cross-entropy against one-hot targets (log clamped at 1e-12)."""
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.log(np.maximum(picked, 1e-12)).mean())


def accuracy_percent(probs: np.ndarray, labels: np.ndarray) -> float:
    # argmax along rows picks the first maximum, i.e. ties go to legal
    return float(100.0 * np.mean(probs.argmax(axis=1) == labels))


def stratified_split(labels: np.ndarray, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded per-class hold-out.  Returns sorted (train, validation) index arrays."""
    rng = seed_rng(seed, _SPLIT_STREAM)
    val = []
    for cls in range(NUM_CLASSES):
        members = np.flatnonzero(labels == cls)
        n_val = min(int(np.floor(len(members) * fraction)), len(members) - 1)
        if n_val > 0:
            val.append(rng.permutation(members)[:n_val])
    val_idx = np.sort(np.concatenate(val)) if val else np.empty(0, dtype=np.int64)
    train_idx = np.setdiff1d(np.arange(len(labels)), val_idx)
    return train_idx, val_idx


def sgd_step(head: HeadModel, features: np.ndarray, labels: np.ndarray, lr: float) -> HeadModel:
    """One plain-SGD update on the batch-mean cross-entropy."""
    probs = head.probabilities(features)
    dw, db = mean_head_gradient(features, probs, one_hot(labels))
    return HeadModel(DenseLayer(head.dense.weights - lr * dw, head.dense.bias - lr * db))


def fit_head(features: np.ndarray, labels, config: TrainConfig) -> tuple[HeadModel, TrainingTrace]:
    """Train a zero-initialised head on pre-extracted ``[N, in_features]`` features."""
    config.validate()
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray([int(l) for l in labels], dtype=np.int64)
    if features.ndim != 2 or features.shape[0] != labels.shape[0]:
        raise ShapeError(f"features {features.shape} do not match {labels.shape[0]} labels")
    present = set(labels.tolist())
    if len(present) < NUM_CLASSES:
        names = ", ".join(ClassLabel(c).token for c in sorted(present)) or "none"
        raise DegenerateDataError(f"training set needs both classes, found only: {names}")

    train_idx, val_idx = stratified_split(labels, config.validation_fraction, config.seed)
    x_train, y_train = features[train_idx], labels[train_idx]
    x_val, y_val = features[val_idx], labels[val_idx]
    targets = one_hot(y_train)

    weights = np.zeros((NUM_CLASSES, features.shape[1]))
    bias = np.zeros(NUM_CLASSES)
    trace = TrainingTrace()
    for epoch in range(1, config.epochs + 1):
        order = seed_rng(config.seed, epoch).permutation(len(train_idx))
        for batch, start in enumerate(range(0, len(order), config.batch_size), start=1):
            rows = order[start : start + config.batch_size]
            scores = x_train[rows] @ weights.T + bias
            if not np.all(np.isfinite(scores)):
                raise DivergenceError(epoch, batch)
            probs = softmax_rows(scores)
            if not np.isfinite(mean_cross_entropy(probs, y_train[rows])):
                raise DivergenceError(epoch, batch)
            dw, db = mean_head_gradient(x_train[rows], probs, targets[rows])
            # overflow surfaces as a DivergenceError on the next batch
            with np.errstate(over="ignore", invalid="ignore"):
                weights -= config.learning_rate * dw
                bias -= config.learning_rate * db

        head = HeadModel(DenseLayer(weights, bias))
        p_train = head.probabilities(x_train)
        if len(val_idx):
            p_val = head.probabilities(x_val)
            val_acc, val_ce = accuracy_percent(p_val, y_val), mean_cross_entropy(p_val, y_val)
        else:
            val_acc = val_ce = None
        trace.records.append(
            EpochRecord(
                epoch,
                accuracy_percent(p_train, y_train),
                val_acc,
                mean_cross_entropy(p_train, y_train),
                val_ce,
            )
        )
    return HeadModel(DenseLayer(weights, bias)), trace


def image_features(backbone: BackboneModel, images: Sequence[np.ndarray]) -> np.ndarray:
    """Preprocess and run each image through the frozen backbone (one row per image)."""
    rows = [extract_features(backbone, preprocess(img)) for img in images]
    if not rows:
        return np.empty((0, backbone.feature_dim))
    return np.stack(rows)


def train_head(
    backbone: BackboneModel, train_set: Sequence[LabeledImage], config: TrainConfig
) -> tuple[HeadModel, TrainingTrace]:
    # the backbone is frozen, so features are computed exactly once
    features = image_features(backbone, [item.pixels for item in train_set])
    return fit_head(features, [item.label for item in train_set], config)


def predict(backbone: BackboneModel, head: HeadModel, image: np.ndarray) -> tuple[ClassLabel, np.ndarray]:
    features = extract_features(backbone, preprocess(image))
    probs = softmax(dense_forward(features, head.dense))
    return ClassLabel(argmax(probs)), probs


# --- persistence ----------------------------------------------------------


def save_head(head: HeadModel, sink: str | os.PathLike | BinaryIO) -> None:
    wio.save(head.named_tensors(), sink)


def load_head(source, in_features: int = FEATURE_DIM) -> HeadModel:
    expected = [("head.weights", (NUM_CLASSES, in_features)), ("head.bias", (NUM_CLASSES,))]
    (_, w), (_, b) = wio.load(source, expected)
    return HeadModel(DenseLayer(w, b))


def save_model(model_dir: str | os.PathLike, backbone: BackboneModel, head: HeadModel) -> None:
    out = Path(model_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_weights(backbone, out / BACKBONE_FILE)
    save_head(head, out / HEAD_FILE)


def load_model(model_dir: str | os.PathLike) -> tuple[BackboneModel, HeadModel]:
    d = Path(model_dir)
    backbone = load_weights(d / BACKBONE_FILE)
    return backbone, load_head(d / HEAD_FILE, backbone.feature_dim)


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def write_trace(trace: TrainingTrace, sink: str | os.PathLike) -> None:
    with open(sink, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for r in trace.records:
            writer.writerow(
                [
                    r.epoch,
                    _fmt(r.train_accuracy),
                    _fmt(r.validation_accuracy),
                    _fmt(r.train_cross_entropy),
                    _fmt(r.validation_cross_entropy),
                ]
            )
