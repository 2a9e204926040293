from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic import ValidationError

from spectra_select.errors import CorruptArtifactError, DatasetIOError
from spectra_select.models import ChannelRanking, RankEntry, ReductionMethod
from spectra_select.reduction.pca import PcaModel
from spectra_select.schemas import RankEntryDocument, RankingDocument

RANKING_VERSION = 1
PCA_MAGIC = b"PCAM"
PCA_VERSION = 1
_PCA_HEADER = struct.Struct("<4sHI")


def save_ranking(path: Union[str, Path], ranking: ChannelRanking) -> None:
    doc = RankingDocument(
        version=RANKING_VERSION,
        method=ranking.method.label,
        channel_count=ranking.channel_count,
        entries=[RankEntryDocument(channel=e.channel, importance=e.importance) for e in ranking.entries],
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # repr-exact floats keep the round trip lossless
    path.write_text(json.dumps(doc.model_dump(), indent=2) + "\n")


def load_ranking(path: Union[str, Path], expected_channels: Optional[int] = None) -> ChannelRanking:
    path = Path(path)
    if not path.is_file():
        raise DatasetIOError(f"ranking file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptArtifactError(f"{path}: not a ranking document ({exc})") from exc
    if not isinstance(raw, dict):
        raise CorruptArtifactError(f"{path}: not a ranking document")
    if raw.get("version") != RANKING_VERSION:
        raise CorruptArtifactError(f"{path}: unsupported ranking version {raw.get('version')!r}")
    try:
        doc = RankingDocument.model_validate(raw)
    except ValidationError as exc:
        raise CorruptArtifactError(f"{path}: invalid ranking document") from exc

    channels = [e.channel for e in doc.entries]
    if sorted(channels) != list(range(doc.channel_count)):
        raise CorruptArtifactError(f"{path}: entries do not cover channels 0..{doc.channel_count - 1}")
    if expected_channels is not None and doc.channel_count != expected_channels:
        raise CorruptArtifactError(
            f"{path}: ranking covers {doc.channel_count} channels, data has {expected_channels}"
        )
    return ChannelRanking(
        entries=[RankEntry(channel=e.channel, importance=e.importance) for e in doc.entries],
        method=ReductionMethod(doc.method.lower()),
        channel_count=doc.channel_count,
    )


def save_pca(path: Union[str, Path], model: PcaModel) -> None:
    channels = model.channel_count
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_PCA_HEADER.pack(PCA_MAGIC, PCA_VERSION, channels))
        fh.write(np.ascontiguousarray(model.mean, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.eigenvalues, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.components, dtype="<f8").tobytes())


def load_pca(path: Union[str, Path], expected_channels: Optional[int] = None) -> PcaModel:
    path = Path(path)
    if not path.is_file():
        raise DatasetIOError(f"PCA file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < _PCA_HEADER.size:
        raise CorruptArtifactError(f"{path}: truncated PCA header")
    magic, version, channels = _PCA_HEADER.unpack_from(blob)
    if magic != PCA_MAGIC:
        raise CorruptArtifactError(f"{path}: not a PCA model file")
    if version != PCA_VERSION:
        raise CorruptArtifactError(f"{path}: unsupported PCA version {version}")
    expected_size = _PCA_HEADER.size + 8 * (2 * channels + channels * channels)
    if len(blob) != expected_size:
        raise CorruptArtifactError(f"{path}: expected {expected_size} bytes, found {len(blob)}")
    if expected_channels is not None and channels != expected_channels:
        raise CorruptArtifactError(
            f"{path}: PCA model has {channels} channels, data has {expected_channels}"
        )
    body = np.frombuffer(blob, dtype="<f8", offset=_PCA_HEADER.size).astype(np.float64)
    mean = body[:channels].copy()
    eigenvalues = body[channels : 2 * channels].copy()
    components = body[2 * channels :].reshape(channels, channels).copy()
    return PcaModel(mean=mean, components=components, eigenvalues=eigenvalues)
