from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

import numpy as np
from joblib import Parallel, delayed

from spectra_select.errors import PreconditionError
from spectra_select.numeric.core import RngStream, as_matrix
from spectra_select.settings import get_thread_count

logger = logging.getLogger(__name__)

LEAF = -1


@dataclass(frozen=True)
class ForestConfig:
    trees: int = 100
    max_depth: int = 8
    min_leaf: int = 5
    features_per_split: Optional[int] = None
    seed: int = 0
    bootstrap: bool = True

    def split_width(self, n_features: int) -> int:
        """Features drawn per split; defaults to ceil(sqrt(C))."""
        k = self.features_per_split or math.ceil(math.sqrt(n_features))
        return int(min(max(k, 1), n_features))


def gini(p: np.ndarray) -> np.ndarray:
    """Binary Gini impurity, p(1-p) summed over both classes."""
    return 2.0 * p * (1.0 - p)


@dataclass
class DecisionTree:
    """
    Flat binary tree. Internal nodes have feature >= 0; leaves have LEAF.

    `value` holds the fraction of positives reaching each node, and
    `impurity_decrease` the Gini drop of each split (0 at leaves).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    impurity_decrease: np.ndarray
    n_samples: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def features_used(self) -> Set[int]:
        return {int(f) for f in self.feature if f != LEAF}

    def depth(self) -> int:
        depths = np.zeros(self.node_count, dtype=int)
        for node in range(self.node_count):
            if self.feature[node] != LEAF:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(len(x), dtype=np.intp)
        active = self.feature[node] != LEAF
        while active.any():
            idx = np.flatnonzero(active)
            current = node[idx]
            go_left = x[idx, self.feature[current]] <= self.threshold[current]
            node[idx] = np.where(go_left, self.left[current], self.right[current])
            active[idx] = self.feature[node[idx]] != LEAF
        return self.value[node]


@dataclass
class Forest:
    trees: List[DecisionTree]
    feature_count: int
    seed: int = 0
    tree_keys: List[Tuple[int, ...]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.trees:
            raise PreconditionError("a forest needs at least one tree")
        for tree in self.trees:
            used = tree.features_used
            if used and max(used) >= self.feature_count:
                raise PreconditionError("tree references a feature beyond the forest's channel count")

    def tree_probabilities(self, x: np.ndarray) -> np.ndarray:
        """T x m matrix of per-tree positive-class probabilities."""
        return np.stack([tree.predict_proba(x) for tree in self.trees])

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return self.tree_probabilities(x).mean(axis=0)

    def trees_using(self) -> Dict[int, List[int]]:
        users: Dict[int, List[int]] = {j: [] for j in range(self.feature_count)}
        for t, tree in enumerate(self.trees):
            for j in sorted(tree.features_used):
                users[j].append(t)
        return users


def _best_split(
    xn: np.ndarray,
    yn: np.ndarray,
    order: np.ndarray,
    width: int,
    min_leaf: int,
    parent_impurity: float,
) -> Optional[Tuple[float, int, float]]:
    """
    Best (decrease, feature, threshold) over the first `width` features of
    `order`, drawing further features only while no valid split was found.
    Ties go to the lower feature index.
    """
    n = len(yn)
    positives = float(yn.sum())
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    size_ok = (n_left >= min_leaf) & (n_right >= min_leaf)

    best: Optional[Tuple[float, int, float]] = None
    evaluated = 0
    for j in order:
        if evaluated >= width and best is not None:
            break
        evaluated += 1
        col = xn[:, j]
        srt = np.argsort(col, kind="stable")
        xs = col[srt]
        valid = size_ok & (xs[:-1] < xs[1:])
        if not valid.any():
            continue
        left_pos = np.cumsum(yn[srt])[:-1]
        p_left = left_pos / n_left
        p_right = (positives - left_pos) / n_right
        child = (n_left * gini(p_left) + n_right * gini(p_right)) / n
        decrease = np.where(valid, parent_impurity - child, -np.inf)
        i = int(np.argmax(decrease))
        gain = max(float(decrease[i]), 0.0)
        if best is None or gain > best[0] or (gain == best[0] and j < best[1]):
            threshold = (xs[i] + xs[i + 1]) / 2.0
            if threshold >= xs[i + 1]:
                threshold = xs[i]
            best = (gain, int(j), float(threshold))
    return best


def fit_tree(x: np.ndarray, y: np.ndarray, cfg: ForestConfig, rng: RngStream) -> DecisionTree:
    gen = rng.generator
    n, n_features = x.shape
    width = cfg.split_width(n_features)
    sample = gen.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)

    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []
    decrease: List[float] = []
    counts: List[int] = []

    def new_node(idx: np.ndarray) -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(y[idx].mean()))
        decrease.append(0.0)
        counts.append(len(idx))
        return len(feature) - 1

    stack = [(new_node(sample), sample, 0)]
    while stack:
        node, idx, depth = stack.pop()
        impurity = float(gini(np.float64(value[node])))
        if depth >= cfg.max_depth or len(idx) < 2 * cfg.min_leaf or impurity == 0.0:
            continue
        split = _best_split(x[idx], y[idx], gen.permutation(n_features), width, cfg.min_leaf, impurity)
        if split is None:
            continue
        gain, j, thr = split
        goes_left = x[idx, j] <= thr
        left_idx, right_idx = idx[goes_left], idx[~goes_left]
        feature[node], threshold[node], decrease[node] = j, thr, gain
        left[node] = new_node(left_idx)
        right[node] = new_node(right_idx)
        stack.append((right[node], right_idx, depth + 1))
        stack.append((left[node], left_idx, depth + 1))

    return DecisionTree(
        feature=np.array(feature, dtype=np.intp),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.intp),
        right=np.array(right, dtype=np.intp),
        value=np.array(value, dtype=np.float64),
        impurity_decrease=np.array(decrease, dtype=np.float64),
        n_samples=np.array(counts, dtype=np.int64),
    )


def fit_random_forest(
    x: np.ndarray,
    y: np.ndarray,
    cfg: ForestConfig,
    rng: Optional[RngStream] = None,
) -> Forest:
    """
    Train `cfg.trees` Gini trees, each on its own bootstrap sample.

    Tree t draws from sub-stream (t,), so thread count never changes the result.
    """
    x = as_matrix(x)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape[0] == 0 or x.shape[1] == 0:
        raise PreconditionError("random forest needs a non-empty sample matrix")
    if len(y) != x.shape[0]:
        raise PreconditionError(f"{x.shape[0]} samples but {len(y)} labels")
    if x.shape[0] < 2:
        raise PreconditionError("random forest needs at least 2 samples")
    if not np.isin(y, (0.0, 1.0)).all():
        raise PreconditionError("labels must be binary (0/1)")
    if len(np.unique(y)) < 2:
        raise PreconditionError("random forest needs both classes in the labels")
    if cfg.trees < 1:
        raise PreconditionError("forest needs at least one tree")

    rng = rng or RngStream(cfg.seed)
    keys = [rng.child(t).key for t in range(cfg.trees)]
    jobs = get_thread_count()
    logger.info(
        "Fitting %d trees on %d x %d samples (depth %d, %d features/split, %d jobs)",
        cfg.trees, x.shape[0], x.shape[1], cfg.max_depth, cfg.split_width(x.shape[1]), jobs,
    )
    trees = Parallel(n_jobs=jobs, prefer="threads")(
        delayed(fit_tree)(x, y, cfg, rng.child(t)) for t in range(cfg.trees)
    )
    return Forest(trees=list(trees), feature_count=x.shape[1], seed=rng.seed, tree_keys=keys)
