from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline

from spectra_select.errors import CorruptArtifactError, DatasetIOError, PreconditionError
from spectra_select.models import LabeledDataset, SpectralCube, WavelengthGrid
from spectra_select.numeric.core import RngStream

logger = logging.getLogger(__name__)

CUBE_MAGIC = b"HSIC"
CUBE_VERSION = 1
_CUBE_HEADER = struct.Struct("<4sHIII")
STATS_VERSION = 1


def _axis_coords(n_in: int, n_out: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Half-pixel-center source coordinates for one axis."""
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize_bilinear(img: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """
    Bilinear resize of an H x W (x channels) image, half-pixel centers.

    Interpolates as a + (b - a) * t so constant regions stay exactly constant.
    """
    if target_h <= 0 or target_w <= 0:
        raise PreconditionError(f"resize target must be positive, got {target_h}x{target_w}")
    img = np.asarray(img, dtype=np.float64)
    y0, y1, fy = _axis_coords(img.shape[0], target_h)
    x0, x1, fx = _axis_coords(img.shape[1], target_w)

    extra = (None,) * (img.ndim - 2)
    fy = fy[(slice(None), None) + extra]
    fx = fx[(None, slice(None)) + extra]

    top = img[y0][:, x0] + (img[y0][:, x1] - img[y0][:, x0]) * fx
    bottom = img[y1][:, x0] + (img[y1][:, x1] - img[y1][:, x0]) * fx
    out = top + (bottom - top) * fy
    return np.clip(out, 0.0, 1.0)


def synthesize_hsi(
    img: np.ndarray,
    grid: WavelengthGrid,
    dtype: type = np.float64,
) -> SpectralCube:
    """
    Spread an H x W x 3 RGB image over the grid's channels.

    Per pixel a natural cubic spline runs through (B, G, R) at the anchor
    wavelengths; beyond the end anchors it continues linearly along the end
    slope. Values are clamped to [0, 1].
    """
    if img.ndim != 3 or img.shape[2] != 3:
        raise PreconditionError(f"expected an H x W x 3 RGB image, got shape {img.shape}")
    height, width, _ = img.shape
    anchors = np.asarray(grid.anchors, dtype=np.float64)
    if anchors[0] < grid.points[0] or anchors[-1] > grid.points[-1]:
        raise PreconditionError("grid does not cover the anchor wavelengths")

    rgb = np.asarray(img, dtype=np.float64).reshape(-1, 3)
    knots = np.stack([rgb[:, 2], rgb[:, 1], rgb[:, 0]])  # B, G, R rows
    spline = CubicSpline(anchors, knots, axis=0, bc_type="natural")

    points = grid.points
    values = spline(points)
    below = points < anchors[0]
    above = points > anchors[-1]
    if below.any():
        start = anchors[0]
        values[below] = spline(start) + spline(start, 1) * (points[below] - start)[:, None]
    if above.any():
        end = anchors[-1]
        values[above] = spline(end) + spline(end, 1) * (points[above] - end)[:, None]

    values = np.clip(values, 0.0, 1.0).reshape(len(points), height, width)
    return SpectralCube(values=values.astype(dtype, copy=False), grid=grid)


@dataclass
class MinMaxStats:
    """Per-channel (min, max) fit on training cubes."""

    min: np.ndarray
    max: np.ndarray
    grid: WavelengthGrid

    def to_dict(self) -> Dict:
        return {
            "version": STATS_VERSION,
            "grid": self.grid.to_dict(),
            "min": [float(v) for v in self.min],
            "max": [float(v) for v in self.max],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "MinMaxStats":
        if data.get("version") != STATS_VERSION:
            raise CorruptArtifactError(f"unsupported scaling stats version {data.get('version')!r}")
        grid = WavelengthGrid.from_dict(data["grid"])
        lo = np.asarray(data["min"], dtype=np.float64)
        hi = np.asarray(data["max"], dtype=np.float64)
        if len(lo) != len(grid) or len(hi) != len(grid):
            raise CorruptArtifactError("scaling stats channel count does not match its grid")
        return cls(min=lo, max=hi, grid=grid)


def minmax_fit(cubes: Iterable[np.ndarray], grid: WavelengthGrid) -> MinMaxStats:
    lo = hi = None
    count = 0
    for values in cubes:
        flat = np.asarray(values, dtype=np.float64).reshape(values.shape[0], -1)
        cube_lo, cube_hi = flat.min(axis=1), flat.max(axis=1)
        lo = cube_lo if lo is None else np.minimum(lo, cube_lo)
        hi = cube_hi if hi is None else np.maximum(hi, cube_hi)
        count += 1
    if count == 0:
        raise PreconditionError("min-max scaling needs at least one training cube")
    if len(lo) != len(grid):
        raise PreconditionError(f"cubes have {len(lo)} channels but grid has {len(grid)}")
    logger.info("Fit min-max stats on %d cubes", count)
    return MinMaxStats(min=lo, max=hi, grid=grid)


def minmax_apply(values: np.ndarray, stats: MinMaxStats) -> np.ndarray:
    """(v - min) / (max - min) per channel; degenerate channels map to 0; clamped to [0, 1]."""
    if values.shape[0] != len(stats.min):
        raise PreconditionError(
            f"cube has {values.shape[0]} channels, scaling stats have {len(stats.min)}"
        )
    span = stats.max - stats.min
    degenerate = span <= 0
    scale = np.where(degenerate, 0.0, 1.0 / np.where(degenerate, 1.0, span))
    shape = (-1,) + (1,) * (values.ndim - 1)
    out = (np.asarray(values, dtype=np.float64) - stats.min.reshape(shape)) * scale.reshape(shape)
    out = np.clip(out, 0.0, 1.0)
    dtype = values.dtype if np.issubdtype(values.dtype, np.floating) else np.float64
    return out.astype(dtype, copy=False)


def sample_pixels(
    dataset: LabeledDataset,
    per_image: int,
    balance: bool,
    rng: RngStream,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw pixel spectra as an n x C table with mask-derived pixel labels.

    Draws are without replacement within each image. With `balance`, half of
    an anomalous image's draws come from its mask, then the majority class is
    thinned so both classes end up equally sized.
    """
    if per_image < 1:
        raise PreconditionError("per_image must be at least 1")
    rows, labels = [], []
    channels = None
    for i, item in enumerate(dataset.items):
        cube = item.data
        if channels is None:
            channels = cube.shape[0]
        elif cube.shape[0] != channels:
            raise PreconditionError(f"{item.name}: cubes do not share one channel count")
        if item.label == 1 and item.mask is None:
            raise PreconditionError(f"{item.name}: anomalous item has no pixel mask")

        n_pixels = cube.shape[1] * cube.shape[2]
        if per_image > n_pixels:
            raise PreconditionError(
                f"{item.name}: per_image={per_image} exceeds pixel count {n_pixels}"
            )
        mask = (
            np.zeros(n_pixels, dtype=bool)
            if item.mask is None
            else np.asarray(item.mask).reshape(-1).astype(bool)
        )
        gen = rng.child(i).generator
        positives = np.flatnonzero(mask)
        if balance and len(positives):
            negatives = np.flatnonzero(~mask)
            n_pos = min(max(per_image // 2, 1), len(positives))
            n_neg = min(per_image - n_pos, len(negatives))
            n_pos = min(per_image - n_neg, len(positives))
            idx = np.concatenate(
                [
                    gen.choice(positives, size=n_pos, replace=False),
                    gen.choice(negatives, size=n_neg, replace=False),
                ]
            )
        else:
            idx = gen.choice(n_pixels, size=per_image, replace=False)

        flat = np.asarray(cube).reshape(channels, -1)
        rows.append(flat[:, idx].T.astype(np.float64))
        labels.append(mask[idx].astype(np.int64))

    if not rows:
        raise PreconditionError("cannot sample pixels from an empty dataset")
    x = np.concatenate(rows)
    y = np.concatenate(labels)

    if balance:
        n_pos = int(y.sum())
        n_neg = len(y) - n_pos
        if n_pos == 0:
            raise PreconditionError("balanced sampling requested but no anomalous pixels exist")
        keep = min(n_pos, n_neg)
        gen = rng.child(len(dataset.items)).generator
        pos_idx = np.flatnonzero(y == 1)
        neg_idx = np.flatnonzero(y == 0)
        if n_pos > keep:
            pos_idx = np.sort(gen.choice(pos_idx, size=keep, replace=False))
        if n_neg > keep:
            neg_idx = np.sort(gen.choice(neg_idx, size=keep, replace=False))
        chosen = np.sort(np.concatenate([pos_idx, neg_idx]))
        x, y = x[chosen], y[chosen]

    logger.info("Sampled %d pixels (%d anomalous) over %d channels", len(y), int(y.sum()), channels)
    return x, y


def save_cube(path: Union[str, Path], values: np.ndarray) -> None:
    """Write a C x H x W array as an HSIC file (32-bit little-endian floats)."""
    if values.ndim != 3:
        raise PreconditionError(f"cube must be C x H x W, got shape {values.shape}")
    channels, height, width = values.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_CUBE_HEADER.pack(CUBE_MAGIC, CUBE_VERSION, channels, height, width))
        fh.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def load_cube(path: Union[str, Path], mmap: bool = True) -> np.ndarray:
    """Read an HSIC file; memory-mapped read-only unless `mmap` is False."""
    path = Path(path)
    if not path.is_file():
        raise DatasetIOError(f"cube file not found: {path}")
    with open(path, "rb") as fh:
        header = fh.read(_CUBE_HEADER.size)
    if len(header) < _CUBE_HEADER.size:
        raise CorruptArtifactError(f"{path}: truncated cube header")
    magic, version, channels, height, width = _CUBE_HEADER.unpack(header)
    if magic != CUBE_MAGIC:
        raise CorruptArtifactError(f"{path}: not an HSIC cube file")
    if version != CUBE_VERSION:
        raise CorruptArtifactError(f"{path}: unsupported cube version {version}")
    expected = _CUBE_HEADER.size + 4 * channels * height * width
    if path.stat().st_size != expected:
        raise CorruptArtifactError(
            f"{path}: expected {expected} bytes, found {path.stat().st_size}"
        )
    shape = (channels, height, width)
    if mmap:
        return np.memmap(path, dtype="<f4", mode="r", offset=_CUBE_HEADER.size, shape=shape)
    data = np.fromfile(path, dtype="<f4", offset=_CUBE_HEADER.size)
    return data.reshape(shape).astype(np.float32)
