"""Reader/writer for the ``CNW1`` weights container.

Layout (all integers unsigned 32-bit little-endian)::

    b"CNW1"
    repeated until EOF:
        name_length, name (UTF-8)
        rank, extent * rank
        product(extents) float32 LE values

Values are stored at 32-bit precision and widened to float64 on load.
"""

from __future__ import annotations

import os
import struct
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .errors import WeightsFormatError

MAGIC = b"CNW1"
_U32 = struct.Struct("<I")

Entry = tuple[str, np.ndarray]


def encode(entries: Iterable[Entry]) -> bytes:
    out = bytearray(MAGIC)
    for name, values in entries:
        raw = name.encode("utf-8")
        out += _U32.pack(len(raw)) + raw
        out += _U32.pack(values.ndim)
        for extent in values.shape:
            out += _U32.pack(extent)
        out += np.ascontiguousarray(values, dtype="<f4").tobytes()
    return bytes(out)


def decode(blob: bytes, expected: Sequence[tuple[str, tuple[int, ...]]] | None = None) -> list[Entry]:
    """Parse a weights blob.

    With ``expected`` given, every entry's name and shape is checked before its
    payload is read, so a corrupted extent is reported against the layer that
    carries it instead of surfacing later as a misaligned read.
    """
    if blob[:4] != MAGIC:
        raise WeightsFormatError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    pos = 4
    entries: list[Entry] = []

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise WeightsFormatError(f"truncated blob while reading {what} at offset {pos}")
        chunk = blob[pos : pos + n]
        pos += n
        return chunk

    while pos < len(blob):
        (name_len,) = _U32.unpack(take(4, "name length"))
        try:
            name = take(name_len, "layer name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise WeightsFormatError(f"layer name at offset {pos - name_len} is not UTF-8") from exc
        (rank,) = _U32.unpack(take(4, f"rank of {name}"))
        shape = tuple(_U32.unpack(take(4, f"extents of {name}"))[0] for _ in range(rank))
        if expected is not None:
            idx = len(entries)
            if idx >= len(expected):
                raise WeightsFormatError(f"unexpected extra layer {name!r}")
            want_name, want_shape = expected[idx]
            if name != want_name:
                raise WeightsFormatError(f"layer {idx} is named {name!r}, expected {want_name!r}")
            if shape != tuple(want_shape):
                raise WeightsFormatError(
                    f"shape mismatch in layer {name!r}: file has {list(shape)}, expected {list(want_shape)}"
                )
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        payload = take(4 * count, f"values of {name}")
        values = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(shape)
        entries.append((name, values))

    if expected is not None and len(entries) != len(expected):
        missing = expected[len(entries)][0]
        raise WeightsFormatError(f"truncated blob: layer {missing!r} missing")
    return entries


def save(entries: Iterable[Entry], sink: str | os.PathLike | BinaryIO) -> None:
    blob = encode(entries)
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as fh:
            fh.write(blob)
    else:
        sink.write(blob)


def load(
    source: str | os.PathLike | BinaryIO | bytes,
    expected: Sequence[tuple[str, tuple[int, ...]]] | None = None,
) -> list[Entry]:
    if isinstance(source, (bytes, bytearray)):
        blob = bytes(source)
    elif isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            blob = fh.read()
    else:
        blob = source.read()
    return decode(blob, expected)


def to_float32(values: np.ndarray) -> np.ndarray:
    """Round to float32 precision (kept as float64) so save/load is lossless."""
    return np.asarray(values, dtype=np.float32).astype(np.float64)

