from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from spectra_select.errors import PreconditionError
from spectra_select.numeric.core import RngStream
from spectra_select.scorer.optim import Params, cross_entropy

LAYER_WIDTHS = (16, 32, 64, 64)
KERNEL = 3
STRIDE = 2
_OFFSETS = [(ki, kj) for ki in range(KERNEL) for kj in range(KERNEL)]


def parameter_shapes(n_channels: int) -> Dict[str, Tuple[int, ...]]:
    shapes: Dict[str, Tuple[int, ...]] = {}
    fan_in = n_channels
    for i, width in enumerate(LAYER_WIDTHS, start=1):
        shapes[f"conv{i}.weight"] = (width, fan_in, KERNEL, KERNEL)
        shapes[f"conv{i}.bias"] = (width,)
        fan_in = width
    shapes["fc.weight"] = (1, LAYER_WIDTHS[-1])
    shapes["fc.bias"] = (1,)
    return shapes


@dataclass
class ScorerNet:
    """
    Four 3x3 stride-2 conv + ReLU blocks, global average pool, one logit.

    `input_channels` holds the physical channel id behind each input plane
    (None for PCA components). conv1's input axis is stored in ascending-id
    order and inputs are gathered into that order before the contraction,
    so the same channels in a different order give bit-identical outputs.
    """

    params: Params
    input_channels: Optional[np.ndarray] = None
    dtype: type = np.float32
    _order: Optional[np.ndarray] = field(init=False, repr=False, default=None)

    def __post_init__(self) -> None:
        expected = parameter_shapes(self.n_channels)
        if set(self.params) != set(expected):
            raise PreconditionError(f"parameter names {sorted(self.params)} do not match the architecture")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise PreconditionError(f"{name}: shape {self.params[name].shape}, expected {shape}")
            if not np.all(np.isfinite(self.params[name])):
                raise PreconditionError(f"{name}: non-finite parameter values")
        if self.input_channels is not None:
            ids = np.asarray(self.input_channels, dtype=np.int64)
            if len(ids) != self.n_channels or len(np.unique(ids)) != len(ids):
                raise PreconditionError("input_channels must be one unique id per input plane")
            self.input_channels = ids
            order = np.argsort(ids, kind="stable")
            if not np.array_equal(order, np.arange(len(ids))):
                self._order = order

    @property
    def n_channels(self) -> int:
        return int(self.params["conv1.weight"].shape[1])

    def with_params(self, params: Params) -> "ScorerNet":
        return ScorerNet(params=params, input_channels=self.input_channels, dtype=self.dtype)

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))


def init_model(
    n_channels: int,
    seed: Union[int, RngStream],
    input_channels: Optional[Sequence[int]] = None,
    dtype: type = np.float32,
) -> ScorerNet:
    """
    He-uniform weights (limit sqrt(6 / fan_in)) from a seeded stream; zero biases.

    `seed` is a plain seed or an already keyed stream; layer l draws from its child (l,).
    """
    if n_channels < 1:
        raise PreconditionError("scorer needs at least one input channel")
    rng = seed if isinstance(seed, RngStream) else RngStream(seed)
    params: Params = {}
    for layer, (name, shape) in enumerate(parameter_shapes(n_channels).items()):
        if name.endswith(".bias"):
            params[name] = np.zeros(shape, dtype=dtype)
            continue
        fan_in = int(np.prod(shape[1:]))
        limit = np.sqrt(6.0 / fan_in)
        params[name] = rng.child(layer).generator.uniform(-limit, limit, size=shape).astype(dtype)
    ids = None if input_channels is None else np.asarray(input_channels, dtype=np.int64)
    return ScorerNet(params=params, input_channels=ids, dtype=dtype)


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    batch, channels, height, width = x.shape
    out_h, out_w = (height - 1) // STRIDE + 1, (width - 1) // STRIDE + 1
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.stack(
        [xp[:, :, ki : ki + STRIDE * out_h - 1 : STRIDE, kj : kj + STRIDE * out_w - 1 : STRIDE] for ki, kj in _OFFSETS],
        axis=2,
    ).reshape(batch, channels * KERNEL * KERNEL, out_h * out_w)
    out = np.matmul(w.reshape(w.shape[0], -1), cols) + b[None, :, None]
    return out.reshape(batch, w.shape[0], out_h, out_w), cols


def _conv_backward(
    dout: np.ndarray,
    cols: np.ndarray,
    w: np.ndarray,
    x_shape: Tuple[int, ...],
    need_dx: bool,
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    batch, out_ch, out_h, out_w = dout.shape
    d = dout.reshape(batch, out_ch, out_h * out_w)
    dw = np.matmul(d, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
    db = d.sum(axis=(0, 2))
    if not need_dx:
        return dw, db, None
    _, channels, height, width = x_shape
    dcols = np.matmul(w.reshape(out_ch, -1).T, d).reshape(batch, channels, KERNEL * KERNEL, out_h, out_w)
    dxp = np.zeros((batch, channels, height + 2, width + 2), dtype=dout.dtype)
    for k, (ki, kj) in enumerate(_OFFSETS):
        dxp[:, :, ki : ki + STRIDE * out_h - 1 : STRIDE, kj : kj + STRIDE * out_w - 1 : STRIDE] += dcols[:, :, k]
    return dw, db, dxp[:, :, 1 : height + 1, 1 : width + 1]


def _prepare(net: ScorerNet, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch)
    if batch.ndim != 4:
        raise PreconditionError(f"batch must be B x N x H x W, got shape {batch.shape}")
    if batch.shape[1] != net.n_channels:
        raise PreconditionError(f"batch has {batch.shape[1]} channels, net expects {net.n_channels}")
    x = batch.astype(net.dtype, copy=False)
    if not np.all(np.isfinite(x)):
        raise PreconditionError("batch contains non-finite values")
    if net._order is not None:
        x = x[:, net._order]
    return x


def _forward_cached(net: ScorerNet, batch: np.ndarray):
    a = _prepare(net, batch)
    cache: List[Tuple[Tuple[int, ...], np.ndarray, np.ndarray]] = []
    for i in range(1, len(LAYER_WIDTHS) + 1):
        z, cols = _conv_forward(a, net.params[f"conv{i}.weight"], net.params[f"conv{i}.bias"])
        cache.append((a.shape, cols, z))
        a = np.maximum(z, 0)
    pooled = a.mean(axis=(2, 3))
    logits = pooled @ net.params["fc.weight"][0] + net.params["fc.bias"][0]
    return logits, cache, a.shape, pooled


def forward_logits(net: ScorerNet, batch: np.ndarray) -> np.ndarray:
    return _forward_cached(net, batch)[0]


def forward(net: ScorerNet, batch: np.ndarray) -> np.ndarray:
    """Probability of anomaly for each item of a B x N x H x W batch."""
    return expit(forward_logits(net, batch).astype(np.float64))


def backward(net: ScorerNet, batch: np.ndarray, y: np.ndarray) -> Tuple[float, Params]:
    """Loss and exact gradients of the mean cross-entropy for every parameter."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if len(y) != np.asarray(batch).shape[0]:
        raise PreconditionError(f"{len(y)} labels for a batch of {np.asarray(batch).shape[0]}")
    logits, cache, last_shape, pooled = _forward_cached(net, batch)
    q = expit(logits.astype(np.float64))
    loss = cross_entropy(y, q)

    dlogits = ((q - y) / len(y)).astype(net.dtype)
    grads: Params = {
        "fc.weight": (dlogits @ pooled)[None, :].astype(net.dtype),
        "fc.bias": np.array([dlogits.sum()], dtype=net.dtype),
    }
    spatial = last_shape[2] * last_shape[3]
    da = (dlogits[:, None] * net.params["fc.weight"][0][None, :] / spatial)[:, :, None, None]
    da = np.broadcast_to(da, last_shape)
    for i in range(len(LAYER_WIDTHS), 0, -1):
        x_shape, cols, z = cache[i - 1]
        dz = da * (z > 0)
        dw, db, dx = _conv_backward(dz, cols, net.params[f"conv{i}.weight"], x_shape, need_dx=i > 1)
        grads[f"conv{i}.weight"] = dw.astype(net.dtype, copy=False)
        grads[f"conv{i}.bias"] = db.astype(net.dtype, copy=False)
        da = dx
    return loss, grads
