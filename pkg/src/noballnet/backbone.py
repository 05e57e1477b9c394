"""Frozen convolutional feature extractor.

A fixed three-block stack stands in for a large pretrained network with its
classification layer removed::

    conv(8, 3x3, pad 1) -> relu -> maxpool2
    conv(16, 3x3, pad 1) -> relu -> maxpool2
    conv(32, 3x3, pad 1) -> relu -> maxpool2 -> flatten

A ``[3, 32, 32]`` image becomes a 4*4*32 = 512 feature vector.  Weights come
from a seeded uniform draw (or from a ``CNW1`` file) and are never updated.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import BinaryIO, Union

import numpy as np

from . import weights as wio
from .errors import ShapeError
from .layers import ConvLayer, conv2d_forward, maxpool2, relu
from .rng import seed_rng

INPUT_SHAPE = (3, 32, 32)
FEATURE_DIM = 512
CHANNELS = (8, 16, 32)
KERNEL = 3

RELU = "relu"
MAXPOOL = "maxpool"

Layer = Union[ConvLayer, str]


@dataclass(frozen=True, eq=False)
class BackboneModel:
    layers: tuple[Layer, ...]
    input_shape: tuple[int, int, int] = INPUT_SHAPE
    output_shape: tuple[int, int, int] = field(init=False, repr=False)

    def __post_init__(self):
        shape = self.input_shape
        for layer in self.layers:
            if isinstance(layer, ConvLayer):
                shape = layer.output_shape(shape)
            elif layer == MAXPOOL:
                if shape[1] % 2 or shape[2] % 2:
                    raise ShapeError(f"maxpool2 cannot follow a {shape} map")
                shape = (shape[0], shape[1] // 2, shape[2] // 2)
            elif layer != RELU:
                raise ValueError(f"unknown layer marker {layer!r}")
        object.__setattr__(self, "output_shape", shape)

    @property
    def feature_dim(self) -> int:
        return int(np.prod(self.output_shape))

    @property
    def conv_layers(self) -> list[ConvLayer]:
        return [layer for layer in self.layers if isinstance(layer, ConvLayer)]

    def named_tensors(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, conv in enumerate(self.conv_layers, start=1):
            out.append((f"conv{i}.kernels", conv.kernels))
            out.append((f"conv{i}.bias", conv.bias))
        return out

    def to_bytes(self) -> bytes:
        return wio.encode(self.named_tensors())


def _assemble(convs: list[ConvLayer]) -> BackboneModel:
    layers: list[Layer] = []
    for conv in convs:
        layers += [conv, RELU, MAXPOOL]
    return BackboneModel(tuple(layers))


def expected_tensors() -> list[tuple[str, tuple[int, ...]]]:
    shapes = []
    in_ch = INPUT_SHAPE[0]
    for i, out_ch in enumerate(CHANNELS, start=1):
        shapes.append((f"conv{i}.kernels", (out_ch, in_ch, KERNEL, KERNEL)))
        shapes.append((f"conv{i}.bias", (out_ch,)))
        in_ch = out_ch
    return shapes


def build_backbone(seed: int) -> BackboneModel:
    rng = seed_rng(seed)
    convs = []
    in_ch = INPUT_SHAPE[0]
    for out_ch in CHANNELS:
        fan_in = in_ch * KERNEL * KERNEL
        # unit-variance uniform draw, scaled to He variance 2 / fan_in
        unit = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=(out_ch, in_ch, KERNEL, KERNEL))
        k = unit * np.sqrt(2.0 / fan_in)
        # float32-representable so a save/load round trip is bit-exact
        convs.append(ConvLayer(wio.to_float32(k), np.zeros(out_ch), stride=1, zero_padding=1))
        in_ch = out_ch
    return _assemble(convs)


def extract_features(model: BackboneModel, image: np.ndarray) -> np.ndarray:
    if image.shape != tuple(model.input_shape):
        raise ShapeError(f"backbone expects input {model.input_shape}, got {image.shape}")
    x = np.asarray(image, dtype=np.float64)
    for layer in model.layers:
        if isinstance(layer, ConvLayer):
            x = conv2d_forward(x, layer)
        elif layer == RELU:
            x = relu(x)
        else:
            x = maxpool2(x)
    return x.reshape(-1)


def save_weights(model: BackboneModel, sink: str | os.PathLike | BinaryIO) -> None:
    wio.save(model.named_tensors(), sink)


def load_weights(source: str | os.PathLike | BinaryIO | bytes) -> BackboneModel:
    entries = wio.load(source, expected_tensors())
    convs = []
    for (_, kernels), (_, bias) in zip(entries[::2], entries[1::2]):
        convs.append(ConvLayer(kernels, bias, stride=1, zero_padding=1))
    return _assemble(convs)
