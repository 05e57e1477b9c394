"""Forward passes for conv / relu / max-pool / dense layers, softmax and
cross-entropy, plus the analytic gradient of the trainable softmax head.

Layout is channel-major: images and feature maps are ``[C, H, W]``.
Convolution is cross-correlation (kernels are not flipped).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import GeometryError, NumericInputError, ShapeError

LOG_CLAMP = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ConvLayer:
    kernels: np.ndarray  # [out_channels, in_channels, kh, kw]
    bias: np.ndarray  # [out_channels]
    stride: int = 1
    zero_padding: int = 0

    def __post_init__(self):
        kernels = _frozen(self.kernels)
        bias = _frozen(self.bias)
        if kernels.ndim != 4:
            raise ShapeError(f"conv kernels must be rank 4, got shape {kernels.shape}")
        if bias.shape != (kernels.shape[0],):
            raise ShapeError(
                f"conv bias shape {bias.shape} does not match {kernels.shape[0]} output channels"
            )
        if self.stride < 1 or self.zero_padding < 0:
            raise GeometryError("stride must be >= 1 and padding >= 0")
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "bias", bias)

    @property
    def in_channels(self) -> int:
        return self.kernels.shape[1]

    @property
    def out_channels(self) -> int:
        return self.kernels.shape[0]

    def output_shape(self, input_shape: tuple[int, int, int]) -> tuple[int, int, int]:
        c, h, w = input_shape
        _, _, kh, kw = self.kernels.shape
        p, s = self.zero_padding, self.stride
        if c != self.in_channels:
            raise ShapeError(f"input has {c} channels, layer expects {self.in_channels}")
        if h + 2 * p < kh or w + 2 * p < kw:
            raise GeometryError(
                f"kernel {kh}x{kw} larger than padded input {h + 2 * p}x{w + 2 * p}"
            )
        return self.out_channels, (h + 2 * p - kh) // s + 1, (w + 2 * p - kw) // s + 1


@dataclass(frozen=True, eq=False)
class DenseLayer:
    weights: np.ndarray  # [out_features, in_features]
    bias: np.ndarray  # [out_features]

    def __post_init__(self):
        weights = _frozen(self.weights)
        bias = _frozen(self.bias)
        if weights.ndim != 2:
            raise ShapeError(f"dense weights must be rank 2, got shape {weights.shape}")
        if bias.shape != (weights.shape[0],):
            raise ShapeError(
                f"dense bias shape {bias.shape} does not match {weights.shape[0]} outputs"
            )
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)

    @property
    def in_features(self) -> int:
        return self.weights.shape[1]

    @property
    def out_features(self) -> int:
        return self.weights.shape[0]


def conv2d_forward(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    if x.ndim != 3:
        raise ShapeError(f"conv input must be [C, H, W], got shape {x.shape}")
    _, out_h, out_w = layer.output_shape(x.shape)
    _, _, kh, kw = layer.kernels.shape
    p, s = layer.zero_padding, layer.stride
    if p:
        x = np.pad(x, ((0, 0), (p, p), (p, p)))
    # windows: [C, H', W', kh, kw] after striding
    windows = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::s, ::s][:, :out_h, :out_w]
    cols = windows.transpose(0, 3, 4, 1, 2).reshape(-1, out_h * out_w)
    out = layer.kernels.reshape(layer.out_channels, -1) @ cols
    out += layer.bias[:, None]
    return out.reshape(layer.out_channels, out_h, out_w)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def maxpool2(x: np.ndarray) -> np.ndarray:
    """Non-overlapping 2x2 max pooling with stride 2.

    Odd spatial extents are rejected rather than silently truncated.
    """
    if x.ndim != 3:
        raise ShapeError(f"maxpool input must be [C, H, W], got shape {x.shape}")
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise GeometryError(f"maxpool2 needs even spatial extents, got {h}x{w}")
    return x.reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4))


def dense_forward(x: np.ndarray, layer: DenseLayer) -> np.ndarray:
    if x.ndim != 1 or x.shape[0] != layer.in_features:
        raise ShapeError(f"dense input shape {x.shape} does not match in_features={layer.in_features}")
    return layer.weights @ x + layer.bias


def softmax(scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ShapeError(f"softmax expects a non-empty vector, got shape {scores.shape}")
    if not np.all(np.isfinite(scores)):
        raise NumericInputError("softmax input contains NaN or Inf")
    e = np.exp(scores - scores.max())
    return e / e.sum()


def cross_entropy(prediction: np.ndarray, target: np.ndarray) -> float:
    """``-sum(target * ln(prediction))`` with prediction clamped at 1e-12."""
    if prediction.shape != target.shape:
        raise ShapeError(f"prediction shape {prediction.shape} != target shape {target.shape}")
    q = np.maximum(prediction, LOG_CLAMP)
    return float(-(target * np.log(q)).sum())


def entropy(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def head_gradient(
    features: np.ndarray, prediction: np.ndarray, target: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of ``cross_entropy(softmax(W @ features + b), target)``
    with respect to ``W`` and ``b``, given the forward ``prediction``."""
    if prediction.shape != target.shape or prediction.ndim != 1:
        raise ShapeError(f"prediction shape {prediction.shape} != target shape {target.shape}")
    if features.ndim != 1:
        raise ShapeError(f"features must be rank 1, got shape {features.shape}")
    dscores = prediction - target
    return np.outer(dscores, features), dscores.copy()


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a ``[batch, n]`` score matrix."""
    if not np.all(np.isfinite(scores)):
        raise NumericInputError("softmax input contains NaN or Inf")
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def mean_head_gradient(
    features: np.ndarray, predictions: np.ndarray, targets: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Batch mean of :func:`head_gradient` over the rows of its arguments."""
    dscores = predictions - targets
    n = features.shape[0]
    return dscores.T @ features / n, dscores.sum(axis=0) / n
