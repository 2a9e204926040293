from __future__ import annotations

import logging

import numpy as np
from joblib import Parallel, delayed

from spectra_select.errors import PreconditionError
from spectra_select.evaluation.metrics import auroc
from spectra_select.models import ChannelRanking, ReductionMethod
from spectra_select.numeric.core import RngStream, as_matrix, permute
from spectra_select.reduction.forest import LEAF, Forest
from spectra_select.settings import get_thread_count

logger = logging.getLogger(__name__)

TREE_AUROC = "tree"
FOREST_AUROC = "forest"
PI_SCORES = (TREE_AUROC, FOREST_AUROC)


def feature_importance(forest: Forest) -> ChannelRanking:
    """
    Mean decrease in Gini impurity per channel.

    Every split adds n_samples * impurity_decrease to its feature; the totals
    over all trees are normalised to sum to 1.
    """
    totals = np.zeros(forest.feature_count, dtype=np.float64)
    for tree in forest.trees:
        internal = tree.feature != LEAF
        np.add.at(
            totals,
            tree.feature[internal],
            tree.n_samples[internal] * tree.impurity_decrease[internal],
        )
    mass = totals.sum()
    if mass > 0:
        scores = totals / mass
    else:
        logger.warning("Forest made no impurity-reducing split; importances are uniform")
        scores = np.full(forest.feature_count, 1.0 / forest.feature_count)
    return ChannelRanking.from_scores(scores, ReductionMethod.FI)


def _tree_aurocs(y_val: np.ndarray, probs: np.ndarray) -> np.ndarray:
    return np.array([auroc(y_val, row) for row in probs])


def permutation_importance(
    forest: Forest,
    x_val: np.ndarray,
    y_val: np.ndarray,
    k: int,
    rng: RngStream,
    score: str = TREE_AUROC,
) -> ChannelRanking:
    """
    PI_j = s - mean_k s_kj, where s_kj is s after permuting column j with
    sub-stream (j, k).

    With `score="tree"` s is the mean of the trees' own validation AUROCs;
    with `score="forest"` it is the AUROC of the averaged forest probability.
    The forest score saturates at 1.0 when several channels carry the same
    signal, since the trees that did not split on j keep the ranking intact.
    Per-tree AUROC still drops for every tree that splits on j.

    Only trees that split on j can change when j is permuted, so every other
    tree's row is reused as-is.
    """
    if k < 1:
        raise PreconditionError(f"permutation importance needs k >= 1 repeats, got {k}")
    if score not in PI_SCORES:
        raise PreconditionError(f"unknown permutation score {score!r}; expected one of {PI_SCORES}")
    x_val = as_matrix(x_val)
    y_val = np.asarray(y_val).reshape(-1)
    if x_val.shape[0] < 2 or len(y_val) != x_val.shape[0]:
        raise PreconditionError("validation set needs at least 2 rows with one label each")
    if len(np.unique(y_val)) < 2:
        raise PreconditionError("validation labels must contain both classes")
    if x_val.shape[1] != forest.feature_count:
        raise PreconditionError(
            f"validation data has {x_val.shape[1]} channels, forest expects {forest.feature_count}"
        )

    base = forest.tree_probabilities(x_val)
    if score == TREE_AUROC:
        base_aurocs = _tree_aurocs(y_val, base)
        baseline = float(base_aurocs.mean())
    else:
        baseline = auroc(y_val, base.mean(axis=0))
    users = forest.trees_using()
    logger.info("Permutation importance: baseline %s AUROC %.4f, %d channels x %d repeats",
                score, baseline, forest.feature_count, k)

    def score_channel(j: int) -> float:
        permuted_scores = []
        for r in range(k):
            column = permute(x_val[:, j], rng.child(j, r))
            if not users[j]:
                permuted_scores.append(baseline)
                continue
            shuffled = x_val.copy()
            shuffled[:, j] = column
            if score == TREE_AUROC:
                aurocs = base_aurocs.copy()
                for t in users[j]:
                    aurocs[t] = auroc(y_val, forest.trees[t].predict_proba(shuffled))
                permuted_scores.append(float(aurocs.mean()))
            else:
                probs = base.copy()
                for t in users[j]:
                    probs[t] = forest.trees[t].predict_proba(shuffled)
                permuted_scores.append(auroc(y_val, probs.mean(axis=0)))
        return baseline - float(np.mean(permuted_scores))

    scores = Parallel(n_jobs=get_thread_count(), prefer="threads")(
        delayed(score_channel)(j) for j in range(forest.feature_count)
    )
    return ChannelRanking.from_scores(np.array(scores), ReductionMethod.PI)
