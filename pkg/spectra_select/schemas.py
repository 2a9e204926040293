from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from spectra_select.data.planted import PlantedConfig
from spectra_select.errors import ConfigError
from spectra_select.models import ReductionMethod, WavelengthGrid
from spectra_select.reduction.forest import ForestConfig
from spectra_select.scorer.optim import TrainConfig


class RunConfig(BaseModel):
    """
    Settings for every command. The JSON config file uses the flat dotted
    aliases ("forest.trees", "train.lr", ...); flags are merged on top.
    """

    model_config = ConfigDict(populate_by_name=True, extra="forbid", frozen=True)

    dataset_root: Optional[str] = Field(None, alias="dataset.root")
    class_name: str = Field("carpet", alias="dataset.class", min_length=1)
    image_size: int = Field(256, alias="dataset.image_size", gt=0)
    split_fraction: float = Field(0.5, alias="dataset.split_fraction", ge=0.0, lt=1.0)
    planted: bool = Field(False, alias="dataset.planted")

    method: ReductionMethod = Field(ReductionMethod.FI, alias="method")
    top_n: int = Field(6, alias="top_n", ge=1)

    grid_points: int = Field(300, alias="grid.points", ge=2)
    grid_min_nm: float = Field(300.0, alias="grid.min_nm")
    grid_max_nm: float = Field(1100.0, alias="grid.max_nm")
    anchor_b_nm: float = Field(450.0, alias="grid.anchor_b")
    anchor_g_nm: float = Field(550.0, alias="grid.anchor_g")
    anchor_r_nm: float = Field(650.0, alias="grid.anchor_r")

    per_image: int = Field(64, alias="sampling.per_image", ge=1)
    balance: bool = Field(True, alias="sampling.balance")

    forest_trees: int = Field(100, alias="forest.trees", ge=1)
    forest_max_depth: int = Field(8, alias="forest.max_depth", ge=1)
    forest_min_leaf: int = Field(5, alias="forest.min_leaf", ge=1)
    forest_features_per_split: Optional[int] = Field(None, alias="forest.features_per_split", ge=1)

    pi_repeats: int = Field(5, alias="pi.repeats", ge=1)
    pi_validation_fraction: float = Field(0.3, alias="pi.validation_fraction", gt=0.0, lt=1.0)
    pi_score: Literal["tree", "forest"] = Field("tree", alias="pi.score")

    train_lr: float = Field(1e-5, alias="train.lr", gt=0.0)
    train_batch: int = Field(8, alias="train.batch", ge=1)
    train_epochs: int = Field(50, alias="train.epochs", ge=0)
    train_early_stop: bool = Field(False, alias="train.early_stop")
    train_beta1: float = Field(0.9, alias="train.beta1", ge=0.0, lt=1.0)
    train_beta2: float = Field(0.999, alias="train.beta2", ge=0.0, lt=1.0)
    train_eps: float = Field(1e-8, alias="train.eps", gt=0.0)

    bench_warmup: int = Field(5, alias="bench.warmup", ge=0)
    bench_reps: int = Field(20, alias="bench.reps", ge=1)
    bench_samples: int = Field(8, alias="bench.samples", ge=1)

    planted_train_images: int = Field(60, alias="planted.train_images", ge=2)
    planted_test_images: int = Field(40, alias="planted.test_images", ge=2)
    planted_size: int = Field(64, alias="planted.size", ge=8)
    planted_band_start: int = Field(140, alias="planted.band_start", ge=0)
    planted_band_width: int = Field(10, alias="planted.band_width", ge=1)
    planted_amplitude: float = Field(0.4, alias="planted.amplitude", gt=0.0)

    seed: int = Field(0, alias="seed", ge=0, lt=2**64)
    out: str = Field("runs", alias="out")

    @model_validator(mode="after")
    def _check_consistency(self) -> "RunConfig":
        if self.top_n > self.grid_points:
            raise ValueError(f"top_n={self.top_n} exceeds grid.points={self.grid_points}")
        if not self.grid_min_nm < self.grid_max_nm:
            raise ValueError("grid.min_nm must be below grid.max_nm")
        if self.planted and self.planted_band_start + self.planted_band_width > self.grid_points:
            raise ValueError("planted band runs past the last channel")
        return self

    @classmethod
    def load(
        cls,
        path: Optional[Union[str, Path]] = None,
        overrides: Optional[Dict[str, Any]] = None,
    ) -> "RunConfig":
        """Read a flat dotted-key JSON file, then apply overrides (which win)."""
        data: Dict[str, Any] = {}
        if path is not None:
            try:
                data = json.loads(Path(path).read_text())
            except FileNotFoundError as exc:
                raise ConfigError(f"config file not found: {path}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError(f"config file {path} must hold a JSON object")
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            first = exc.errors()[0]
            where = ".".join(str(p) for p in first.get("loc", ())) or "config"
            raise ConfigError(f"{where}: {first.get('msg')}") from exc

    def to_flat_dict(self) -> Dict[str, Any]:
        return self.model_dump(by_alias=True, mode="json")

    def grid(self) -> WavelengthGrid:
        return WavelengthGrid.linear(
            self.grid_min_nm,
            self.grid_max_nm,
            self.grid_points,
            anchors=(self.anchor_b_nm, self.anchor_g_nm, self.anchor_r_nm),
        )

    def forest_config(self) -> ForestConfig:
        return ForestConfig(
            trees=self.forest_trees,
            max_depth=self.forest_max_depth,
            min_leaf=self.forest_min_leaf,
            features_per_split=self.forest_features_per_split,
            seed=self.seed,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lr=self.train_lr,
            batch=self.train_batch,
            epochs=self.train_epochs,
            beta1=self.train_beta1,
            beta2=self.train_beta2,
            eps=self.train_eps,
            seed=self.seed,
            early_stop=self.train_early_stop,
        )

    def planted_config(self) -> PlantedConfig:
        return PlantedConfig(
            train_images=self.planted_train_images,
            test_images=self.planted_test_images,
            size=self.planted_size,
            band_start=self.planted_band_start,
            band_width=self.planted_band_width,
            amplitude=self.planted_amplitude,
        )


class RankEntryDocument(BaseModel):
    channel: int = Field(ge=0)
    importance: float


class RankingDocument(BaseModel):
    version: int
    method: Literal["FI", "PI"]
    channel_count: int = Field(ge=1)
    entries: List[RankEntryDocument]


class CubeRecord(BaseModel):
    name: str
    split: Literal["train", "test"]
    label: int = Field(ge=0, le=1)
    file: str
    mask_file: str
    sha256: str


class CubeManifest(BaseModel):
    version: int = 1
    class_name: str
    source: Literal["mvtec", "planted"]
    grid: Dict[str, List[float]]
    items: List[CubeRecord]
    moved_to_train: List[str] = Field(default_factory=list)
    planted_band: Optional[List[int]] = None
    stats_file: str
    stats_sha256: str


class RunManifest(BaseModel):
    version: int = 1
    class_name: str
    method: str
    config: Dict[str, Any]
    seeds: Dict[str, List[int]]
    artifacts: Dict[str, str]
    versions: Dict[str, str]
