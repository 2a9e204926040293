from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Optional, Union

import numpy as np

from spectra_select.errors import PreconditionError
from spectra_select.models import ChannelRanking, ReductionMethod, SpectralCube
from spectra_select.reduction.pca import PcaModel, pca_transform


def select_channels(
    cube: Union[SpectralCube, np.ndarray],
    ranking: ChannelRanking,
    n: int,
) -> np.ndarray:
    """Keep the N top-ranked channels; output channel i is ranking entry i."""
    values = cube.values if isinstance(cube, SpectralCube) else np.asarray(cube)
    channels = values.shape[0]
    if not 1 <= n <= channels:
        raise PreconditionError(f"cannot keep {n} of {channels} channels")
    if n > len(ranking.entries):
        raise PreconditionError(f"ranking holds {len(ranking.entries)} channels, {n} requested")
    idx = np.asarray(ranking.top(n), dtype=np.intp)
    if idx.min() < 0 or idx.max() >= channels:
        raise PreconditionError(f"ranking index out of range for a {channels}-channel cube")
    return values[idx]


class BaseReducer(ABC):
    """Base class for the channel-reduction step in front of the scorer."""

    method: ReductionMethod

    @property
    @abstractmethod
    def output_channels(self) -> int:
        raise NotImplementedError

    @property
    def input_channels(self) -> Optional[np.ndarray]:
        """
        Physical channel behind each output channel, or None when outputs
        are not physical channels (feature extraction).
        """
        return None

    @abstractmethod
    def transform(self, cube: np.ndarray) -> np.ndarray:
        """Map a C x H x W cube to N x H x W."""
        raise NotImplementedError

    def __call__(self, cube: np.ndarray) -> np.ndarray:
        return self.transform(cube)


class IdentityReducer(BaseReducer):
    """Origin: all channels in their natural order."""

    method = ReductionMethod.ORIGIN

    def __init__(self, channel_count: int) -> None:
        self.channel_count = channel_count

    @property
    def output_channels(self) -> int:
        return self.channel_count

    @property
    def input_channels(self) -> np.ndarray:
        return np.arange(self.channel_count)

    def transform(self, cube: np.ndarray) -> np.ndarray:
        if cube.shape[0] != self.channel_count:
            raise PreconditionError(
                f"cube has {cube.shape[0]} channels, expected {self.channel_count}"
            )
        return cube


class ChannelSelector(BaseReducer):
    """FI/PI: gather the top-N ranked channels."""

    def __init__(self, ranking: ChannelRanking, top_n: int) -> None:
        if not 1 <= top_n <= ranking.channel_count:
            raise PreconditionError(f"top_n must be in [1, {ranking.channel_count}], got {top_n}")
        self.ranking = ranking
        self.top_n = top_n
        self.method = ranking.method

    @property
    def output_channels(self) -> int:
        return self.top_n

    @property
    def input_channels(self) -> np.ndarray:
        return np.asarray(self.ranking.top(self.top_n))

    def transform(self, cube: np.ndarray) -> np.ndarray:
        return select_channels(cube, self.ranking, self.top_n)


class PcaProjector(BaseReducer):
    """PCA: project onto the first N components."""

    method = ReductionMethod.PCA

    def __init__(self, model: PcaModel, top_n: int) -> None:
        if not 1 <= top_n <= model.channel_count:
            raise PreconditionError(f"top_n must be in [1, {model.channel_count}], got {top_n}")
        self.model = model
        self.top_n = top_n

    @property
    def output_channels(self) -> int:
        return self.top_n

    def transform(self, cube: np.ndarray) -> np.ndarray:
        return pca_transform(self.model, cube, self.top_n)
