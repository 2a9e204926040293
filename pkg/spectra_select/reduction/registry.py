from __future__ import annotations

import logging
from typing import Dict, List, Optional, Tuple, Type, Union

import numpy as np

from spectra_select.errors import PreconditionError
from spectra_select.models import ChannelRanking, ReductionMethod
from spectra_select.numeric.core import RngStream
from spectra_select.reduction.base import (
    BaseReducer,
    ChannelSelector,
    IdentityReducer,
    PcaProjector,
)
from spectra_select.reduction.forest import ForestConfig, fit_random_forest
from spectra_select.reduction.importance import TREE_AUROC, feature_importance, permutation_importance
from spectra_select.reduction.pca import PcaModel, fit_pca

logger = logging.getLogger(__name__)

Artifact = Optional[Union[ChannelRanking, PcaModel]]

_REDUCERS: Dict[ReductionMethod, Type[BaseReducer]] = {
    ReductionMethod.ORIGIN: IdentityReducer,
    ReductionMethod.FI: ChannelSelector,
    ReductionMethod.PI: ChannelSelector,
    ReductionMethod.PCA: PcaProjector,
}


def list_methods() -> List[ReductionMethod]:
    return list(_REDUCERS)


def split_validation(
    x: np.ndarray,
    y: np.ndarray,
    fraction: float,
    rng: RngStream,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Stratified (fit, validation) split; each part keeps both classes."""
    fit_idx, val_idx = [], []
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        if len(members) < 2:
            raise PreconditionError(f"need at least 2 samples of class {cls} to hold out validation")
        members = rng.child(cls).generator.permutation(members)
        n_val = min(max(int(round(fraction * len(members))), 1), len(members) - 1)
        val_idx.append(members[:n_val])
        fit_idx.append(members[n_val:])
    fit = np.sort(np.concatenate(fit_idx))
    val = np.sort(np.concatenate(val_idx))
    return x[fit], y[fit], x[val], y[val]


def fit_reduction(
    method: ReductionMethod,
    x: np.ndarray,
    y: np.ndarray,
    forest_cfg: ForestConfig,
    rng: RngStream,
    pi_repeats: int = 5,
    validation_fraction: float = 0.3,
    pi_score: str = TREE_AUROC,
) -> Artifact:
    """
    Training-phase DRM fit on scaled pixel samples.

    FI ranks by the forest's Gini importance, PI fits the forest on one part
    of the samples and permutes the held-out part, PCA eigendecomposes the
    sample covariance. Origin has nothing to fit.
    """
    if method is ReductionMethod.ORIGIN:
        return None
    if method is ReductionMethod.PCA:
        return fit_pca(x)
    if method is ReductionMethod.FI:
        forest = fit_random_forest(x, y, forest_cfg, rng.child(0))
        return feature_importance(forest)
    x_fit, y_fit, x_val, y_val = split_validation(x, y, validation_fraction, rng.child(1))
    forest = fit_random_forest(x_fit, y_fit, forest_cfg, rng.child(0))
    return permutation_importance(forest, x_val, y_val, pi_repeats, rng.child(2), score=pi_score)


def build_reducer(
    method: ReductionMethod,
    artifact: Artifact,
    top_n: int,
    channel_count: int,
) -> BaseReducer:
    """Inference-phase reducer for a method and its loaded artifact."""
    reducer_cls = _REDUCERS[method]
    if reducer_cls is IdentityReducer:
        return IdentityReducer(channel_count)
    if reducer_cls is ChannelSelector:
        if not isinstance(artifact, ChannelRanking):
            raise PreconditionError(f"{method.label} needs a channel ranking")
        if artifact.method is not method:
            raise PreconditionError(f"ranking was made by {artifact.method.label}, not {method.label}")
        return ChannelSelector(artifact, top_n)
    if not isinstance(artifact, PcaModel):
        raise PreconditionError("PCA needs a fitted PCA model")
    return PcaProjector(artifact, top_n)
