from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from spectra_select.data.cube import MinMaxStats, load_cube, save_cube
from spectra_select.errors import CorruptArtifactError, DatasetIOError
from spectra_select.models import LabeledDataset, LabeledItem, ReductionMethod, Split, WavelengthGrid
from spectra_select.schemas import CubeManifest, CubeRecord

logger = logging.getLogger(__name__)

CUBE_DIR = "cubes"
CUBE_MANIFEST = "cubes.json"
STATS_FILE = "stats.json"


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_json(path: Union[str, Path], data: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def read_json(path: Union[str, Path]) -> Any:
    path = Path(path)
    if not path.is_file():
        raise DatasetIOError(f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CorruptArtifactError(f"{path}: invalid JSON ({exc})") from exc


def write_csv(path: Union[str, Path], frame: pd.DataFrame, index: bool = False) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=index, lineterminator="\n")


class ArtifactRepository:
    """
    File layout of one output root.

    <out>/<class>/cubes/...            cached cubes and masks (HSIC)
    <out>/<class>/cubes.json, stats.json
    <out>/<class>/<method>/...          ranking.json | pca.bin, weights.bin, eval.*, bench.*, manifest.json
    """

    def __init__(self, out: Union[str, Path], class_name: str) -> None:
        self.out = Path(out)
        self.class_name = class_name

    @property
    def class_dir(self) -> Path:
        return self.out / self.class_name

    def method_dir(self, method: ReductionMethod) -> Path:
        return self.class_dir / method.value

    def path(self, method: ReductionMethod, name: str) -> Path:
        return self.method_dir(method) / name

    def reduction_artifact(self, method: ReductionMethod) -> Optional[Path]:
        if method.is_selection:
            return self.path(method, "ranking.json")
        if method is ReductionMethod.PCA:
            return self.path(method, "pca.bin")
        return None

    # cube cache

    @staticmethod
    def _cube_file(name: str) -> str:
        return f"{CUBE_DIR}/{Path(name).with_suffix('.hsic').as_posix()}"

    def save_item(self, item: LabeledItem, split: Split) -> CubeRecord:
        """Write one cube and its mask (as a 1-channel cube)."""
        cube_file = self._cube_file(item.name)
        mask_file = cube_file.replace(".hsic", ".mask.hsic")
        save_cube(self.class_dir / cube_file, item.data)
        mask = item.mask if item.mask is not None else np.zeros(item.data.shape[1:], dtype=np.uint8)
        save_cube(self.class_dir / mask_file, mask[None].astype(np.float32))
        return CubeRecord(
            name=item.name,
            split=split.value,
            label=item.label,
            file=cube_file,
            mask_file=mask_file,
            sha256=sha256_file(self.class_dir / cube_file),
        )

    def write_manifest(
        self,
        records: List[CubeRecord],
        stats: MinMaxStats,
        source: str,
        moved_to_train: Optional[List[str]] = None,
        planted_band: Optional[List[int]] = None,
    ) -> CubeManifest:
        write_json(self.class_dir / STATS_FILE, stats.to_dict())
        manifest = CubeManifest(
            class_name=self.class_name,
            source=source,
            grid={"points": [float(p) for p in stats.grid.points], "anchors": list(stats.grid.anchors)},
            items=records,
            moved_to_train=list(moved_to_train or []),
            planted_band=planted_band,
            stats_file=STATS_FILE,
            stats_sha256=sha256_file(self.class_dir / STATS_FILE),
        )
        write_json(self.class_dir / CUBE_MANIFEST, manifest.model_dump())
        logger.info("Cached %d cubes under %s", len(records), self.class_dir)
        return manifest

    def load_manifest(self) -> CubeManifest:
        path = self.class_dir / CUBE_MANIFEST
        if not path.is_file():
            raise DatasetIOError(f"no cube cache at {self.class_dir}; run synth first")
        try:
            return CubeManifest.model_validate(read_json(path))
        except ValidationError as exc:
            raise CorruptArtifactError(f"{path}: {exc.errors()[0].get('msg')}") from exc

    def load_stats(self) -> MinMaxStats:
        return MinMaxStats.from_dict(read_json(self.class_dir / STATS_FILE))

    def load_cubes(self, mmap: bool = True) -> Tuple[LabeledDataset, LabeledDataset, MinMaxStats]:
        """Cached (train, test) cube datasets with masks, plus the scaling stats."""
        manifest = self.load_manifest()
        stats = self.load_stats()
        grid = WavelengthGrid.from_dict(manifest.grid)
        if grid != stats.grid:
            raise CorruptArtifactError(f"{self.class_dir}: stats grid differs from the cube manifest grid")
        splits: Dict[str, List[LabeledItem]] = {Split.TRAIN.value: [], Split.TEST.value: []}
        for record in manifest.items:
            values = load_cube(self.class_dir / record.file, mmap=mmap)
            if values.shape[0] != len(grid):
                raise CorruptArtifactError(
                    f"{record.file}: {values.shape[0]} channels, manifest grid has {len(grid)}"
                )
            mask = np.asarray(load_cube(self.class_dir / record.mask_file, mmap=False)[0]).astype(np.uint8)
            splits[record.split].append(
                LabeledItem(name=record.name, data=values, label=record.label, mask=mask)
            )
        return (
            LabeledDataset(items=splits[Split.TRAIN.value], split=Split.TRAIN, grid=grid),
            LabeledDataset(items=splits[Split.TEST.value], split=Split.TEST, grid=grid),
            stats,
        )
