"""Image decoding, preprocessing and dataset manifests."""

from __future__ import annotations

import csv
import enum
import io
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import DecodeError, ManifestError, ShapeError

TARGET_SIZE = 32
MIN_EXTENT = 8


class ClassLabel(enum.IntEnum):
    LEGAL = 0
    NOBALL = 1

    @property
    def token(self) -> str:
        return self.name.lower()

    @classmethod
    def from_token(cls, token: str) -> "ClassLabel":
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown label {token!r}; expected 'legal' or 'noball'") from None


NUM_CLASSES = len(ClassLabel)


@dataclass
class LabeledImage:
    pixels: np.ndarray  # [3, H, W] in [0, 1]
    label: ClassLabel
    source_id: str = ""


@dataclass
class DatasetManifest:
    entries: list[tuple[str, ClassLabel]]
    root: Path = field(default_factory=Path)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def labels(self) -> list[ClassLabel]:
        return [label for _, label in self.entries]

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.root / p

    def subset(self, indices) -> "DatasetManifest":
        return DatasetManifest([self.entries[i] for i in indices], self.root)


# --- netpbm ---------------------------------------------------------------


def _read_header(data: bytes) -> tuple[bytes, int, int, int, int]:
    """Return (magic, width, height, maxval, payload_offset)."""
    if len(data) < 2 or data[:2] not in (b"P5", b"P6"):
        raise DecodeError(f"bad magic {data[:2]!r}, expected P5 or P6", 0)
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise DecodeError("truncated header", pos)
        c = data[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise DecodeError("unterminated comment in header", pos)
            pos = end + 1
        elif c.isdigit():
            start = pos
            while pos < len(data) and data[pos : pos + 1].isdigit():
                pos += 1
            fields.append(int(data[start:pos]))
        else:
            raise DecodeError(f"unexpected byte {c!r} in header", pos)
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise DecodeError("missing whitespace after maxval", pos)
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise DecodeError(f"invalid dimensions {width}x{height}", pos)
    if maxval != 255:
        raise DecodeError(f"unsupported maxval {maxval}, only 255 is accepted", pos)
    return data[:2], width, height, maxval, pos + 1


def decode_image(data: bytes) -> np.ndarray:
    """Decode binary PPM (P6) or PGM (P5) bytes to a ``[3, H, W]`` tensor in [0, 1].

    Grayscale input is replicated across the three channels.
    """
    magic, width, height, _, offset = _read_header(data)
    channels = 3 if magic == b"P6" else 1
    need = width * height * channels
    payload = data[offset : offset + need]
    if len(payload) < need:
        raise DecodeError(
            f"truncated pixel data: need {need} bytes, got {len(payload)}", offset + len(payload)
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    if channels == 1:
        pixels = np.repeat(pixels, 3, axis=2)
    return pixels.transpose(2, 0, 1).astype(np.float64) / 255.0


def encode_ppm(pixels: np.ndarray) -> bytes:
    """Encode an ``[H, W, 3]`` uint8 array as binary PPM."""
    if pixels.dtype != np.uint8 or pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ShapeError(f"encode_ppm expects uint8 [H, W, 3], got {pixels.dtype} {pixels.shape}")
    h, w, _ = pixels.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(pixels).tobytes()


def to_uint8(image: np.ndarray) -> np.ndarray:
    """``[3, H, W]`` float image in [0, 1] -> ``[H, W, 3]`` uint8."""
    return np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8).transpose(1, 2, 0)


def read_image(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_image(fh.read())


# --- preprocessing --------------------------------------------------------


def preprocess(image: np.ndarray) -> np.ndarray:
    """Nearest-neighbour resize to 32x32, then centre values to [-0.5, 0.5]."""
    if image.ndim != 3 or image.shape[0] != 3:
        raise ShapeError(f"expected a [3, H, W] image, got shape {image.shape}")
    _, h, w = image.shape
    if h < MIN_EXTENT or w < MIN_EXTENT:
        raise ShapeError(f"image {h}x{w} is smaller than the {MIN_EXTENT}x{MIN_EXTENT} minimum")
    rows = np.arange(TARGET_SIZE) * h // TARGET_SIZE
    cols = np.arange(TARGET_SIZE) * w // TARGET_SIZE
    return image[:, rows[:, None], cols[None, :]] - 0.5


# --- manifests ------------------------------------------------------------

MANIFEST_HEADER = ["path", "label"]


def parse_manifest(text: str, root: str | os.PathLike = ".") -> DatasetManifest:
    reader = csv.reader(io.StringIO(text))
    entries: list[tuple[str, ClassLabel]] = []
    seen: dict[str, int] = {}
    for row in reader:
        lineno = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if lineno == 1 and [c.strip() for c in row] == MANIFEST_HEADER:
            continue
        if len(row) != 2:
            raise ManifestError(f"expected 'path,label', got {len(row)} fields", lineno)
        path, token = row[0].strip(), row[1]
        try:
            label = ClassLabel.from_token(token)
        except ValueError as exc:
            raise ManifestError(str(exc), lineno) from None
        if path in seen:
            raise ManifestError(f"duplicate path {path!r} (first seen on line {seen[path]})", lineno)
        seen[path] = lineno
        entries.append((path, label))
    return DatasetManifest(entries, Path(root))


def load_manifest(path: str | os.PathLike) -> DatasetManifest:
    path = Path(path)
    return parse_manifest(path.read_text(encoding="utf-8"), path.parent)


def write_manifest(manifest: DatasetManifest, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for p, label in manifest.entries:
            writer.writerow([p, label.token])


def iter_images(manifest: DatasetManifest) -> Iterator[LabeledImage]:
    for path, label in manifest.entries:
        yield LabeledImage(read_image(manifest.resolve(path)), label, path)
