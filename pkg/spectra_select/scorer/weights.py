from __future__ import annotations

import struct
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from spectra_select.errors import CorruptArtifactError, DatasetIOError, PreconditionError
from spectra_select.scorer.net import ScorerNet, parameter_shapes

WEIGHTS_MAGIC = b"SCNW"
WEIGHTS_VERSION = 1
INPUT_CHANNELS_TENSOR = "input_channels"
_HEADER = struct.Struct("<4sHI")


def save_weights(path: Union[str, Path], net: ScorerNet) -> None:
    """Write every tensor as {name, rank, dims, f32 data}; channel ids ride along as a tensor."""
    tensors: Dict[str, np.ndarray] = dict(net.params)
    if net.input_channels is not None:
        tensors[INPUT_CHANNELS_TENSOR] = np.asarray(net.input_channels, dtype=np.float64)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(WEIGHTS_MAGIC, WEIGHTS_VERSION, net.n_channels))
        for name, tensor in tensors.items():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", tensor.ndim))
            fh.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
            fh.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def _take(blob: bytes, offset: int, size: int, path: Path) -> bytes:
    if offset + size > len(blob):
        raise CorruptArtifactError(f"{path}: truncated weights file")
    return blob[offset : offset + size]


def load_weights(path: Union[str, Path], expected_channels: Optional[int] = None) -> ScorerNet:
    path = Path(path)
    if not path.is_file():
        raise DatasetIOError(f"weights file not found: {path}")
    blob = path.read_bytes()
    magic, version, n_channels = _HEADER.unpack(_take(blob, 0, _HEADER.size, path))
    if magic != WEIGHTS_MAGIC:
        raise CorruptArtifactError(f"{path}: not a scorer weights file")
    if version != WEIGHTS_VERSION:
        raise CorruptArtifactError(f"{path}: unsupported weights version {version}")
    if expected_channels is not None and n_channels != expected_channels:
        raise CorruptArtifactError(
            f"{path}: weights expect {n_channels} input channels, pipeline provides {expected_channels}"
        )

    tensors: Dict[str, np.ndarray] = {}
    offset = _HEADER.size
    while offset < len(blob):
        (name_len,) = struct.unpack("<H", _take(blob, offset, 2, path))
        offset += 2
        name = _take(blob, offset, name_len, path).decode("utf-8", errors="replace")
        offset += name_len
        (rank,) = struct.unpack("<B", _take(blob, offset, 1, path))
        offset += 1
        dims = struct.unpack(f"<{rank}I", _take(blob, offset, 4 * rank, path))
        offset += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(_take(blob, offset, 4 * count, path), dtype="<f4")
        offset += 4 * count
        tensors[name] = data.reshape(dims).astype(np.float32)

    channel_ids = tensors.pop(INPUT_CHANNELS_TENSOR, None)
    expected = parameter_shapes(n_channels)
    if set(tensors) != set(expected):
        raise CorruptArtifactError(f"{path}: tensors {sorted(tensors)} do not match the scorer architecture")
    for name, shape in expected.items():
        if tensors[name].shape != shape:
            raise CorruptArtifactError(f"{path}: {name} has shape {tensors[name].shape}, expected {shape}")
    ids = None if channel_ids is None else channel_ids.astype(np.int64)
    try:
        return ScorerNet(params=tensors, input_channels=ids, dtype=np.float32)
    except PreconditionError as exc:
        raise CorruptArtifactError(f"{path}: {exc}") from exc
