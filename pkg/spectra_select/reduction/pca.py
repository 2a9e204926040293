from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from spectra_select.errors import PreconditionError
from spectra_select.models import SpectralCube
from spectra_select.numeric.core import as_matrix, covariance, sym_eig

logger = logging.getLogger(__name__)

EIGENVALUE_FLOOR = -1e-10


@dataclass(frozen=True)
class PcaModel:
    """Mean spectrum, column eigenvectors Q and descending eigenvalues."""

    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray

    @property
    def channel_count(self) -> int:
        return len(self.mean)


def fit_pca(x: np.ndarray) -> PcaModel:
    x = as_matrix(x)
    if x.shape[0] < 2:
        raise PreconditionError(f"PCA needs at least 2 samples, got {x.shape[0]}")
    mean = x.mean(axis=0)
    eigenvalues, q = sym_eig(covariance(x))
    # round-off below zero
    eigenvalues = np.where((eigenvalues < 0) & (eigenvalues >= EIGENVALUE_FLOOR), 0.0, eigenvalues)
    logger.info(
        "PCA on %d x %d samples: leading eigenvalues %s",
        x.shape[0], x.shape[1], np.array2string(eigenvalues[:6], precision=4),
    )
    return PcaModel(mean=mean, components=q, eigenvalues=eigenvalues)


def _cube_values(cube: Union[SpectralCube, np.ndarray]) -> np.ndarray:
    return cube.values if isinstance(cube, SpectralCube) else np.asarray(cube)


def pca_transform(
    model: PcaModel,
    cube: Union[SpectralCube, np.ndarray],
    n_components: int,
) -> np.ndarray:
    """Per pixel: subtract the mean spectrum and project on the first N components."""
    values = _cube_values(cube)
    channels = values.shape[0]
    if channels != model.channel_count:
        raise PreconditionError(
            f"cube has {channels} channels, PCA model was fit on {model.channel_count}"
        )
    if not 1 <= n_components <= channels:
        raise PreconditionError(f"n_components must be in [1, {channels}], got {n_components}")
    flat = values.reshape(channels, -1).astype(np.float64) - model.mean[:, None]
    reduced = model.components[:, :n_components].T @ flat
    dtype = values.dtype if values.dtype == np.float32 else np.float64
    return reduced.reshape((n_components,) + values.shape[1:]).astype(dtype, copy=False)


def pca_inverse_transform(model: PcaModel, reduced: np.ndarray) -> np.ndarray:
    """Map N projected channels back to the C-channel spectral space."""
    n_components = reduced.shape[0]
    flat = reduced.reshape(n_components, -1).astype(np.float64)
    restored = model.components[:, :n_components] @ flat + model.mean[:, None]
    return restored.reshape((model.channel_count,) + reduced.shape[1:])
