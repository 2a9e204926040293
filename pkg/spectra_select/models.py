from __future__ import annotations

from dataclasses import asdict, dataclass, field
from enum import Enum, IntEnum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from spectra_select.errors import PreconditionError


class ReductionMethod(str, Enum):
    ORIGIN = "origin"
    FI = "fi"
    PI = "pi"
    PCA = "pca"

    @property
    def label(self) -> str:
        """Display name used in report tables (Origin, FI, PI, PCA)."""
        return "Origin" if self is ReductionMethod.ORIGIN else self.value.upper()

    @property
    def is_selection(self) -> bool:
        return self in (ReductionMethod.FI, ReductionMethod.PI)


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


class SeedStage(IntEnum):
    """Key of each stage's sub-stream under the run seed."""

    SPLIT = 0
    PLANTED = 1
    SAMPLE = 2
    REDUCTION = 3
    INIT = 4
    TRAIN = 5


@dataclass(frozen=True)
class WavelengthGrid:
    """
    Wavelengths (nm) of the synthesized channels plus the B, G, R anchors.

    The default grid is 300 points spread linearly over 300-1100 nm.
    """

    points: np.ndarray
    anchors: Tuple[float, float, float] = (450.0, 550.0, 650.0)

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.float64)
        object.__setattr__(self, "points", points)
        if points.ndim != 1 or len(points) < 2:
            raise PreconditionError("wavelength grid needs at least two points")
        if not np.all(np.isfinite(points)) or np.any(np.diff(points) <= 0):
            raise PreconditionError("wavelength grid must be finite and strictly increasing")
        anchors = tuple(float(a) for a in self.anchors)
        if len(anchors) != 3 or not (anchors[0] < anchors[1] < anchors[2]):
            raise PreconditionError("anchor wavelengths must be three increasing values (B, G, R)")
        if anchors[0] < points[0] or anchors[2] > points[-1]:
            raise PreconditionError(
                f"anchors {anchors} fall outside the grid [{points[0]}, {points[-1]}]"
            )
        object.__setattr__(self, "anchors", anchors)

    @classmethod
    def linear(
        cls,
        min_nm: float = 300.0,
        max_nm: float = 1100.0,
        count: int = 300,
        anchors: Tuple[float, float, float] = (450.0, 550.0, 650.0),
    ) -> "WavelengthGrid":
        return cls(points=np.linspace(min_nm, max_nm, count), anchors=anchors)

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WavelengthGrid):
            return NotImplemented
        return self.anchors == other.anchors and np.array_equal(self.points, other.points)

    def __hash__(self) -> int:
        return hash((self.anchors, self.points.tobytes()))

    def nearest_channel(self, wavelength_nm: float) -> int:
        return int(np.argmin(np.abs(self.points - wavelength_nm)))

    def anchor_channels(self, tol: float = 1e-9) -> List[int]:
        """Channels whose wavelength coincides with an anchor (may be empty)."""
        found = []
        for anchor in self.anchors:
            idx = self.nearest_channel(anchor)
            if abs(self.points[idx] - anchor) <= tol:
                found.append(idx)
        return found

    def to_dict(self) -> Dict:
        return {"points": [float(p) for p in self.points], "anchors": list(self.anchors)}

    @classmethod
    def from_dict(cls, data: Dict) -> "WavelengthGrid":
        return cls(points=np.asarray(data["points"], dtype=np.float64), anchors=tuple(data["anchors"]))


@dataclass
class SpectralCube:
    """C x H x W reflectance values sampled on a wavelength grid."""

    values: np.ndarray
    grid: WavelengthGrid

    def __post_init__(self) -> None:
        if self.values.ndim != 3:
            raise PreconditionError(f"cube must be C x H x W, got shape {self.values.shape}")
        if self.values.shape[0] != len(self.grid):
            raise PreconditionError(
                f"cube has {self.values.shape[0]} channels but grid has {len(self.grid)}"
            )

    @property
    def channels(self) -> int:
        return int(self.values.shape[0])

    @property
    def height(self) -> int:
        return int(self.values.shape[1])

    @property
    def width(self) -> int:
        return int(self.values.shape[2])


@dataclass
class LabeledItem:
    """One image or cube with its image label and optional pixel mask."""

    name: str
    data: np.ndarray
    label: int
    mask: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise PreconditionError(f"{self.name}: label must be 0 or 1, got {self.label}")
        if self.mask is not None:
            # H x W x 3 images or C x H x W cubes
            if self.mask.shape not in (self.data.shape[:2], self.data.shape[-2:]):
                raise PreconditionError(
                    f"{self.name}: mask shape {self.mask.shape} does not match data {self.data.shape}"
                )


@dataclass
class LabeledDataset:
    items: List[LabeledItem]
    split: Split
    grid: Optional[WavelengthGrid] = None

    def __len__(self) -> int:
        return len(self.items)

    @property
    def labels(self) -> List[int]:
        return [item.label for item in self.items]

    def has_both_classes(self) -> bool:
        return len(set(self.labels)) == 2


@dataclass(frozen=True)
class RankEntry:
    channel: int
    importance: float


@dataclass
class ChannelRanking:
    """
    Channels sorted by importance descending, ties by ascending channel index.
    """

    entries: List[RankEntry]
    method: ReductionMethod
    channel_count: int

    @classmethod
    def from_scores(cls, scores: Sequence[float], method: ReductionMethod) -> "ChannelRanking":
        scores = np.asarray(scores, dtype=np.float64)
        # lexsort keys: last one is primary
        order = np.lexsort((np.arange(len(scores)), -scores))
        entries = [RankEntry(channel=int(j), importance=float(scores[j])) for j in order]
        return cls(entries=entries, method=method, channel_count=len(scores))

    @property
    def indices(self) -> List[int]:
        return [entry.channel for entry in self.entries]

    def top(self, n: int) -> List[int]:
        return self.indices[:n]

    def scores_by_channel(self) -> np.ndarray:
        scores = np.zeros(self.channel_count, dtype=np.float64)
        for entry in self.entries:
            scores[entry.channel] = entry.importance
        return scores


@dataclass
class ScoreReport:
    class_name: str
    method: ReductionMethod
    auroc_percent: float
    n: int
    pairs: List[Tuple[int, float]] = field(default_factory=list)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["method"] = self.method.label
        data["pairs"] = [[int(label), float(score)] for label, score in self.pairs]
        return data

    def csv_row(self) -> Dict:
        return {
            "class": self.class_name,
            "method": self.method.label,
            "auroc_percent": self.auroc_percent,
            "n": self.n,
        }


@dataclass
class LatencyReport:
    method: str
    samples: int
    warmup: int
    mean: float
    std: float
    min: float
    max: float
    median: float
    environment: Dict[str, str]

    def to_dict(self) -> Dict:
        return asdict(self)

    def csv_row(self) -> Dict:
        return {
            "method": self.method,
            "sec_per_sample": self.mean,
            "std": self.std,
            "min": self.min,
            "max": self.max,
        }
