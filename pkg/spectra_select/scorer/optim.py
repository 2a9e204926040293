from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from spectra_select.errors import PreconditionError

PROB_CLAMP = 1e-7

Params = Dict[str, np.ndarray]


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-5
    batch: int = 8
    epochs: int = 50
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    early_stop: bool = False
    patience: int = 5
    min_rel_improvement: float = 1e-4

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise PreconditionError(f"learning rate must be positive, got {self.lr}")
        if self.batch < 1:
            raise PreconditionError(f"batch size must be at least 1, got {self.batch}")
        if self.epochs < 0:
            raise PreconditionError(f"epochs must be non-negative, got {self.epochs}")


@dataclass
class AdamState:
    m: Params
    v: Params
    t: int = 0

    @classmethod
    def zeros(cls, params: Params) -> "AdamState":
        return cls(
            m={name: np.zeros_like(p) for name, p in params.items()},
            v={name: np.zeros_like(p) for name, p in params.items()},
            t=0,
        )


def cross_entropy(y: np.ndarray, q: np.ndarray) -> float:
    """Mean binary cross-entropy with q clamped to [1e-7, 1 - 1e-7]."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if len(y) == 0:
        raise PreconditionError("cross-entropy of an empty batch")
    if len(y) != len(q):
        raise PreconditionError(f"{len(y)} labels but {len(q)} probabilities")
    q = np.clip(q, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(np.mean(-(y * np.log(q) + (1.0 - y) * np.log(1.0 - q))))


def adam_step(
    params: Params,
    grads: Params,
    state: AdamState,
    cfg: TrainConfig,
) -> Tuple[Params, AdamState]:
    """One bias-corrected Adam update; returns new params and state."""
    if params.keys() != grads.keys() or params.keys() != state.m.keys():
        raise PreconditionError("parameter, gradient and optimizer names differ")
    t = state.t + 1
    correction1 = 1.0 - cfg.beta1**t
    correction2 = 1.0 - cfg.beta2**t
    new_params: Params = {}
    new_m: Params = {}
    new_v: Params = {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise PreconditionError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        m = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        new_params[name] = (p - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)).astype(p.dtype, copy=False)
        new_m[name] = m.astype(p.dtype, copy=False)
        new_v[name] = v.astype(p.dtype, copy=False)
    return new_params, AdamState(m=new_m, v=new_v, t=t)
