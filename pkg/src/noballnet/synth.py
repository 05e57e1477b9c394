"""Deterministic synthetic two-class scene generator.

Each image shows a green field, a dark vertical batsman bar with a light
horizontal waist line, and a red ball.  The ball centre decides the label:
above the waist line by more than ``exclusion_margin`` pixels is a no-ball,
below it by more than the margin is legal.  Centres inside the margin band are
resampled so no label sits on the boundary.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import ClassLabel, DatasetManifest, encode_ppm, to_uint8, write_manifest
from .errors import ConfigError
from .rng import seed_rng

BACKGROUND = (0.15, 0.55, 0.20)
BATSMAN = (0.10, 0.10, 0.12)
WAIST_LINE = (0.95, 0.95, 0.60)
BALL = (0.90, 0.10, 0.10)


@dataclass(frozen=True)
class SynthConfig:
    width: int = 64
    height: int = 64
    waist_fraction: float = 0.55
    ball_radius: float = 3
    exclusion_margin: float = 2
    noise_sigma: float = 0.05
    seed: int = 42

    @property
    def waist_y(self) -> float:
        """Row of the waist line, measured from the top."""
        return self.height * (1.0 - self.waist_fraction)

    def validate(self) -> None:
        if self.width < 8 or self.height < 8:
            raise ConfigError(f"image {self.width}x{self.height} is below the 8x8 minimum")
        if not 0.0 < self.waist_fraction < 1.0:
            raise ConfigError(f"waist_fraction must lie in (0, 1), got {self.waist_fraction}")
        if self.ball_radius <= 0 or 2 * self.ball_radius + 1 > min(self.width, self.height):
            raise ConfigError(f"ball radius {self.ball_radius} does not fit a {self.width}x{self.height} image")
        if self.exclusion_margin < 0:
            raise ConfigError("exclusion_margin must be >= 0")
        limit = self.height * min(self.waist_fraction, 1.0 - self.waist_fraction)
        if self.exclusion_margin >= limit:
            raise ConfigError(f"exclusion_margin {self.exclusion_margin} must be < {limit:g}")
        if not self.noise_sigma >= 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        lo, hi = self.ball_radius, self.height - 1 - self.ball_radius
        if not lo < self.waist_y - self.exclusion_margin:
            raise ConfigError("no room for a no-ball centre above the waist line")
        if not self.waist_y + self.exclusion_margin < hi:
            raise ConfigError("no room for a legal centre below the waist line")


@dataclass(frozen=True)
class SynthRecord:
    path: str
    label: ClassLabel
    ball_x: float
    ball_y: float


@dataclass
class SynthDataset:
    manifest: DatasetManifest
    records: list[SynthRecord]


def label_for(config: SynthConfig, ball_y: float) -> ClassLabel | None:
    """Ground-truth label for a ball centre row, or None inside the margin band."""
    if ball_y < config.waist_y - config.exclusion_margin:
        return ClassLabel.NOBALL
    if ball_y > config.waist_y + config.exclusion_margin:
        return ClassLabel.LEGAL
    return None


def render_scene(config: SynthConfig, ball_x: float, ball_y: float, rng=None) -> np.ndarray:
    """Render one scene as a ``[3, H, W]`` float image in [0, 1]."""
    h, w = config.height, config.width
    img = np.empty((3, h, w))
    img[:] = np.array(BACKGROUND)[:, None, None]

    bar_half = max(1, w // 20)
    bar_x = w // 2
    bar_top = int(round(0.15 * h))
    img[:, bar_top:, bar_x - bar_half : bar_x + bar_half] = np.array(BATSMAN)[:, None, None]

    waist_row = min(h - 1, int(np.floor(config.waist_y)))
    img[:, waist_row, :] = np.array(WAIST_LINE)[:, None]

    yy, xx = np.mgrid[0:h, 0:w]
    disk = (yy - ball_y) ** 2 + (xx - ball_x) ** 2 <= config.ball_radius**2
    img[:, disk] = np.array(BALL)[:, None]

    if rng is not None and config.noise_sigma > 0:
        img = img + rng.normal(0.0, config.noise_sigma, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def _sample_centre(config: SynthConfig, want: ClassLabel, rng: np.random.Generator) -> tuple[float, float]:
    r = config.ball_radius
    while True:
        x = rng.uniform(r, config.width - 1 - r)
        y = rng.uniform(r, config.height - 1 - r)
        if label_for(config, y) is want:
            return x, y


def generate_synthetic(config: SynthConfig, count_per_class: int, out_dir: str | os.PathLike) -> SynthDataset:
    """Write ``count_per_class`` P6 images per class plus ``manifest.csv`` into ``out_dir``."""
    config.validate()
    if count_per_class < 1:
        raise ConfigError(f"count_per_class must be >= 1, got {count_per_class}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rng = seed_rng(config.seed)
    records: list[SynthRecord] = []
    for i in range(count_per_class):
        for label in ClassLabel:
            x, y = _sample_centre(config, label, rng)
            image = render_scene(config, x, y, rng)
            name = f"{label.token}_{i:04d}.ppm"
            (out / name).write_bytes(encode_ppm(to_uint8(image)))
            records.append(SynthRecord(name, label, x, y))

    manifest = DatasetManifest([(r.path, r.label) for r in records], out)
    write_manifest(manifest, out / "manifest.csv")
    return SynthDataset(manifest, records)
