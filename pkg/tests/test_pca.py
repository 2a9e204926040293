import json

import numpy as np
import pytest

from spectra_select.errors import CorruptArtifactError, DatasetIOError, PreconditionError
from spectra_select.models import ChannelRanking, ReductionMethod, SpectralCube, WavelengthGrid
from spectra_select.numeric.core import covariance
from spectra_select.reduction.artifacts import load_pca, load_ranking, save_pca, save_ranking
from spectra_select.reduction.base import IdentityReducer, PcaProjector, select_channels
from spectra_select.reduction.pca import fit_pca, pca_inverse_transform, pca_transform


def _model(seed: int = 0, n: int = 100, channels: int = 5):
    x = np.random.default_rng(seed).normal(size=(n, channels)) * np.arange(1, channels + 1)
    return x, fit_pca(x)


def test_pca_on_a_line():
    t = np.random.default_rng(1).normal(size=50)
    model = fit_pca(np.column_stack([t, 2.0 * t]))
    assert np.allclose(model.components[:, 0], np.array([1.0, 2.0]) / np.sqrt(5.0), atol=1e-10)
    assert abs(model.eigenvalues[1]) <= 1e-10
    assert model.eigenvalues[0] > 0


def test_pca_variances_match_eigenvalues():
    x, model = _model()
    coords = (x - model.mean) @ model.components
    assert np.allclose(coords.var(axis=0, ddof=1), model.eigenvalues, rtol=0, atol=1e-8)
    assert np.all(np.diff(model.eigenvalues) <= 0)
    assert abs(model.eigenvalues.sum() - np.trace(covariance(x))) <= 1e-8
    assert np.allclose(model.components.T @ model.components, np.eye(5), atol=1e-8)


def test_pca_needs_two_samples():
    with pytest.raises(PreconditionError):
        fit_pca(np.ones((1, 4)))


def test_transform_of_mean_is_zero_and_full_basis_inverts():
    x, model = _model(channels=4)
    cube = np.random.default_rng(2).random((4, 3, 5))
    cube[:, 0, 0] = model.mean
    reduced = pca_transform(model, cube, 4)
    assert reduced.shape == (4, 3, 5)
    assert np.allclose(reduced[:, 0, 0], 0.0, atol=1e-12)
    assert np.allclose(pca_inverse_transform(model, reduced), cube, atol=1e-6)


def test_single_component_keeps_rank_one_ordering():
    direction = np.array([1.0, 0.5, 2.0])
    t = np.linspace(-1.0, 1.0, 20)
    model = fit_pca(t[:, None] * direction)
    shuffled = np.random.default_rng(3).permutation(t)
    cube = (shuffled[:, None] * direction).T.reshape(3, 4, 5)
    coords = pca_transform(model, cube, 1).reshape(-1)
    assert np.array_equal(np.argsort(coords), np.argsort(shuffled))


def test_transform_accepts_cubes_and_keeps_float32():
    grid = WavelengthGrid.linear(300.0, 1100.0, 4)
    _, model = _model(channels=4)
    values = np.random.default_rng(4).random((4, 2, 2)).astype(np.float32)
    out = pca_transform(model, SpectralCube(values=values, grid=grid), 2)
    assert out.dtype == np.float32 and out.shape == (2, 2, 2)
    with pytest.raises(PreconditionError):
        pca_transform(model, values, 5)
    with pytest.raises(PreconditionError):
        pca_transform(model, values[:3], 2)


def test_select_channels_follows_ranking_order():
    cube = np.arange(4 * 2 * 2, dtype=float).reshape(4, 2, 2)
    ranking = ChannelRanking.from_scores([0.1, 0.4, 0.2, 0.3], ReductionMethod.FI)
    out = select_channels(cube, ranking, 4)
    assert ranking.indices == [1, 3, 2, 0]
    for i, channel in enumerate(ranking.indices):
        assert np.array_equal(out[i], cube[channel])
    assert sorted(map(tuple, out.reshape(4, -1))) == sorted(map(tuple, cube.reshape(4, -1)))
    assert select_channels(cube, ranking, 2).shape == (2, 2, 2)
    with pytest.raises(PreconditionError):
        select_channels(cube, ranking, 5)


def test_reducers_report_their_channels():
    cube = np.zeros((4, 2, 2))
    identity = IdentityReducer(4)
    assert identity(cube) is cube
    assert list(identity.input_channels) == [0, 1, 2, 3]
    with pytest.raises(PreconditionError):
        identity(np.zeros((3, 2, 2)))

    _, model = _model(channels=4)
    projector = PcaProjector(model, 2)
    assert projector.output_channels == 2 and projector.input_channels is None
    with pytest.raises(PreconditionError):
        PcaProjector(model, 0)


def test_ranking_file_round_trip(tmp_path):
    scores = np.random.default_rng(5).random(300)
    scores /= scores.sum()
    ranking = ChannelRanking.from_scores(scores, ReductionMethod.FI)
    path = tmp_path / "ranking.json"
    save_ranking(path, ranking)
    assert load_ranking(path, expected_channels=300) == ranking
    doc = json.loads(path.read_text())
    assert doc["version"] == 1 and doc["method"] == "FI" and doc["channel_count"] == 300


def test_ranking_file_failures(tmp_path):
    ranking = ChannelRanking.from_scores([0.5, -0.2, 0.1], ReductionMethod.PI)
    path = tmp_path / "ranking.json"
    save_ranking(path, ranking)
    with pytest.raises(CorruptArtifactError):
        load_ranking(path, expected_channels=4)
    with pytest.raises(DatasetIOError):
        load_ranking(tmp_path / "missing.json")

    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(CorruptArtifactError):
        load_ranking(path)

    doc = json.loads(text)
    doc["version"] = 2
    path.write_text(json.dumps(doc))
    with pytest.raises(CorruptArtifactError):
        load_ranking(path)

    doc["version"] = 1
    doc["entries"] = doc["entries"][:2]
    path.write_text(json.dumps(doc))
    with pytest.raises(CorruptArtifactError):
        load_ranking(path)


def test_pca_file_round_trip_is_bit_exact(tmp_path):
    _, model = _model(channels=6)
    path = tmp_path / "pca.bin"
    save_pca(path, model)
    assert path.read_bytes()[:4] == b"PCAM"
    loaded = load_pca(path, expected_channels=6)
    assert np.array_equal(loaded.components, model.components)
    assert np.array_equal(loaded.eigenvalues, model.eigenvalues)
    assert np.array_equal(loaded.mean, model.mean)


def test_pca_file_failures(tmp_path):
    _, model = _model(channels=3)
    path = tmp_path / "pca.bin"
    save_pca(path, model)
    blob = path.read_bytes()
    with pytest.raises(CorruptArtifactError):
        load_pca(path, expected_channels=4)

    path.write_bytes(blob[:-8])
    with pytest.raises(CorruptArtifactError):
        load_pca(path)

    path.write_bytes(b"NOPE" + blob[4:])
    with pytest.raises(CorruptArtifactError):
        load_pca(path)

    path.write_bytes(blob[:4] + (7).to_bytes(2, "little") + blob[6:])
    with pytest.raises(CorruptArtifactError):
        load_pca(path)
