from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Tuple

import numpy as np

from spectra_select.data.cube import synthesize_hsi
from spectra_select.errors import PreconditionError
from spectra_select.models import LabeledDataset, LabeledItem, Split, WavelengthGrid
from spectra_select.numeric.core import RngStream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlantedConfig:
    """Desk-scale dataset whose anomaly signal lives only in one channel band."""

    train_images: int = 60
    test_images: int = 40
    size: int = 64
    band_start: int = 140
    band_width: int = 10
    amplitude: float = 0.4
    anomaly_fraction: float = 0.5
    noise: float = 0.01

    @property
    def band(self) -> range:
        return range(self.band_start, self.band_start + self.band_width)


def _texture(gen: np.random.Generator, size: int) -> np.ndarray:
    """Smooth RGB texture around a random base color."""
    base = gen.uniform(0.15, 0.45, size=3)
    yy, xx = np.mgrid[0:size, 0:size] / size
    freq = gen.uniform(1.0, 4.0, size=2)
    phase = gen.uniform(0.0, 2 * np.pi, size=2)
    ripple = 0.03 * np.sin(2 * np.pi * freq[0] * xx + phase[0]) * np.cos(2 * np.pi * freq[1] * yy + phase[1])
    rgb = base[None, None, :] + ripple[:, :, None]
    return np.clip(rgb, 0.0, 1.0)


def _make_item(
    name: str,
    anomalous: bool,
    cfg: PlantedConfig,
    grid: WavelengthGrid,
    gen: np.random.Generator,
) -> LabeledItem:
    cube = synthesize_hsi(_texture(gen, cfg.size), grid).values
    cube = cube + gen.normal(0.0, cfg.noise, size=cube.shape)
    mask = np.zeros((cfg.size, cfg.size), dtype=np.uint8)
    if anomalous:
        h, w = gen.integers(cfg.size // 4, cfg.size // 2 + 1, size=2)
        top = int(gen.integers(0, cfg.size - h + 1))
        left = int(gen.integers(0, cfg.size - w + 1))
        mask[top : top + h, left : left + w] = 1
        cube[cfg.band_start : cfg.band_start + cfg.band_width, mask.astype(bool)] += cfg.amplitude
    cube = np.clip(cube, 0.0, 1.0).astype(np.float32)
    return LabeledItem(name=name, data=cube, label=int(anomalous), mask=mask)


def _iter_split(
    split: Split,
    count: int,
    cfg: PlantedConfig,
    grid: WavelengthGrid,
    rng: RngStream,
) -> Iterator[LabeledItem]:
    n_anomalous = int(round(cfg.anomaly_fraction * count))
    flags = np.zeros(count, dtype=bool)
    flags[rng.generator.choice(count, size=n_anomalous, replace=False)] = True
    for i in range(count):
        yield _make_item(f"{split.value}/{i:04d}", bool(flags[i]), cfg, grid, rng.child(i).generator)


def iter_planted_items(
    cfg: PlantedConfig,
    grid: WavelengthGrid,
    rng: RngStream,
) -> Iterator[Tuple[Split, LabeledItem]]:
    """Yield (split, item) one cube at a time, train split first."""
    if cfg.band_start < 0 or cfg.band_start + cfg.band_width > len(grid):
        raise PreconditionError(
            f"planted band {cfg.band_start}..{cfg.band_start + cfg.band_width - 1} "
            f"is outside the {len(grid)}-channel grid"
        )
    if cfg.train_images < 2 or cfg.test_images < 2:
        raise PreconditionError("planted dataset needs at least 2 train and 2 test images")
    logger.info(
        "Planted defects in channels %d-%d (%.1f-%.1f nm)",
        cfg.band_start,
        cfg.band_start + cfg.band_width - 1,
        grid.points[cfg.band_start],
        grid.points[cfg.band_start + cfg.band_width - 1],
    )
    for item in _iter_split(Split.TRAIN, cfg.train_images, cfg, grid, rng.child(0)):
        yield Split.TRAIN, item
    for item in _iter_split(Split.TEST, cfg.test_images, cfg, grid, rng.child(1)):
        yield Split.TEST, item


def make_planted_dataset(
    cfg: PlantedConfig,
    grid: WavelengthGrid,
    rng: RngStream,
) -> Tuple[LabeledDataset, LabeledDataset]:
    """Return (train, test) cube datasets with masks; both splits hold both classes."""
    splits: Dict[Split, List[LabeledItem]] = {Split.TRAIN: [], Split.TEST: []}
    for split, item in iter_planted_items(cfg, grid, rng):
        splits[split].append(item)
    return (
        LabeledDataset(items=splits[Split.TRAIN], split=Split.TRAIN, grid=grid),
        LabeledDataset(items=splits[Split.TEST], split=Split.TEST, grid=grid),
    )
