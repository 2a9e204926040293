from __future__ import annotations

import logging
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Sequence, Union

import numpy as np
from scipy.stats import rankdata

from spectra_select.errors import PreconditionError
from spectra_select.models import LabeledDataset, ReductionMethod, ScoreReport

logger = logging.getLogger(__name__)

CubeScorer = Callable[[np.ndarray], float]


def anomaly_score(q: float) -> float:
    """The scorer's probability is the anomaly score."""
    return float(q)


def auroc(labels: Sequence[int], scores: Sequence[float]) -> float:
    """
    Mann-Whitney AUROC with average ranks for ties.

    Equals the fraction of (anomalous, normal) pairs ordered correctly,
    each tie counting one half.
    """
    y = np.asarray(labels).reshape(-1)
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if len(y) != len(s):
        raise PreconditionError(f"{len(y)} labels but {len(s)} scores")
    positives = int(np.sum(y == 1))
    negatives = int(np.sum(y == 0))
    if positives + negatives != len(y):
        raise PreconditionError("labels must be 0 or 1")
    if positives == 0 or negatives == 0:
        raise PreconditionError("AUROC needs both normal and anomalous labels")
    ranks = rankdata(s, method="average")
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - positives * (positives + 1) / 2.0) / (positives * negatives)


def round_half_up(value: float) -> float:
    """Round to one decimal, halves away from zero on the printed value."""
    return float(Decimal(repr(float(value))).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def to_percent(value: float) -> float:
    """AUROC in percent, rounded half-up to one decimal."""
    return round_half_up(value * 100.0)


def evaluate(
    pipeline: CubeScorer,
    test: LabeledDataset,
    class_name: str,
    method: Union[ReductionMethod, str],
) -> ScoreReport:
    """Score every test cube and report image-level AUROC."""
    if not test.has_both_classes():
        raise PreconditionError(f"{class_name}: test set must contain both normal and anomalous items")
    method = ReductionMethod(method)
    pairs = []
    for item in test.items:
        pairs.append((int(item.label), anomaly_score(pipeline(item.data))))
    value = auroc([p[0] for p in pairs], [p[1] for p in pairs])
    logger.info("%s %s: AUROC %.4f over %d items", class_name, method.label, value, len(pairs))
    return ScoreReport(
        class_name=class_name,
        method=method,
        auroc_percent=to_percent(value),
        n=len(pairs),
        pairs=pairs,
    )
