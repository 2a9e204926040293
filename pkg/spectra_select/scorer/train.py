from __future__ import annotations

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from spectra_select.errors import PreconditionError
from spectra_select.numeric.core import RngStream
from spectra_select.scorer.net import ScorerNet, backward
from spectra_select.scorer.optim import AdamState, TrainConfig, adam_step

logger = logging.getLogger(__name__)


def _plateaued(history: List[float], cfg: TrainConfig) -> bool:
    if len(history) <= cfg.patience:
        return False
    before = history[-1 - cfg.patience]
    improvement = (before - history[-1]) / max(abs(before), 1e-12)
    return improvement < cfg.min_rel_improvement


def train(
    net: ScorerNet,
    data: Sequence[Tuple[np.ndarray, int]],
    cfg: TrainConfig,
    rng: Optional[RngStream] = None,
) -> Tuple[ScorerNet, List[float]]:
    """
    Mini-batch Adam on the mean cross-entropy.

    Each epoch visits the items in an order drawn from sub-stream (epoch,);
    the history holds the sample-weighted mean batch loss per epoch.
    """
    if not data:
        raise PreconditionError("training data is empty")
    labels = np.array(getattr(data, "labels", None) or [int(label) for _, label in data])
    if len(np.unique(labels)) < 2:
        raise PreconditionError("training data must contain both normal and anomalous items")

    rng = rng or RngStream(cfg.seed)
    params = dict(net.params)
    state = AdamState.zeros(params)
    history: List[float] = []
    n = len(data)

    for epoch in range(cfg.epochs):
        order = rng.child(epoch).generator.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch):
            chunk = order[start : start + cfg.batch]
            batch = np.stack([np.asarray(data[i][0]) for i in chunk]).astype(net.dtype, copy=False)
            loss, grads = backward(net.with_params(params), batch, labels[chunk])
            params, state = adam_step(params, grads, state, cfg)
            total += loss * len(chunk)
            logger.debug("epoch %d batch %d loss %.6f", epoch, start // cfg.batch, loss)
        history.append(total / n)
        logger.info("Epoch %d/%d loss %.6f", epoch + 1, cfg.epochs, history[-1])
        if cfg.early_stop and _plateaued(history, cfg):
            logger.info("Loss plateaued after %d epochs; stopping", epoch + 1)
            break

    return net.with_params(params), history
