from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from spectra_select.data.cube import resize_bilinear, synthesize_hsi
from spectra_select.data.mvtec import decode_rgb, load_mvtec_class, move_anomalies_to_train
from spectra_select.errors import DatasetIOError, DatasetLayoutError
from spectra_select.models import WavelengthGrid
from spectra_select.numeric.core import RngStream


def _png(path: Path, array: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(array).save(path)


def _mock_class(root: Path, size: int = 8, defects: int = 1) -> Path:
    cls = root / "carpet"
    rgb = np.full((size, size, 3), 128, dtype=np.uint8)
    for i in range(2):
        _png(cls / "train" / "good" / f"{i:03d}.png", rgb)
    _png(cls / "test" / "good" / "000.png", rgb)
    for i in range(defects):
        _png(cls / "test" / "cut" / f"{i:03d}.png", rgb)
        mask = np.zeros((size, size), dtype=np.uint8)
        mask[2:4, 2:4] = 255
        _png(cls / "ground_truth" / "cut" / f"{i:03d}_mask.png", mask)
    return cls


def test_loads_class_in_lexicographic_order(tmp_path):
    _mock_class(tmp_path)
    train, test = load_mvtec_class(tmp_path, "carpet")
    assert [item.name for item in train.items] == ["train/good/000.png", "train/good/001.png"]
    assert [item.name for item in test.items] == ["test/cut/000.png", "test/good/000.png"]
    assert test.labels == [1, 0]
    assert train.labels == [0, 0]
    assert test.items[0].mask.sum() == 4
    assert test.items[1].mask.sum() == 0
    assert np.allclose(train.items[0].data, 128 / 255.0)


def test_grayscale_images_are_replicated(tmp_path):
    cls = _mock_class(tmp_path)
    _png(cls / "train" / "good" / "002.png", np.full((8, 8), 51, dtype=np.uint8))
    train, _ = load_mvtec_class(tmp_path, "carpet")
    gray = train.items[2].data
    assert gray.shape == (8, 8, 3)
    assert np.allclose(gray, 0.2)


def test_resize_on_load(tmp_path):
    _mock_class(tmp_path)
    train, test = load_mvtec_class(tmp_path, "carpet", size=4)
    assert train.items[0].data.shape == (4, 4, 3)
    assert test.items[0].mask.shape == (4, 4)
    assert test.items[0].label == 1


def test_missing_root_is_io_error(tmp_path):
    with pytest.raises(DatasetIOError):
        load_mvtec_class(tmp_path / "nowhere", "carpet")


def test_missing_mask_is_layout_error(tmp_path):
    cls = _mock_class(tmp_path)
    (cls / "ground_truth" / "cut" / "000_mask.png").unlink()
    with pytest.raises(DatasetLayoutError):
        load_mvtec_class(tmp_path, "carpet")


def test_mask_size_mismatch_names_the_file(tmp_path):
    cls = _mock_class(tmp_path)
    _png(cls / "ground_truth" / "cut" / "000_mask.png", np.zeros((4, 4), dtype=np.uint8))
    with pytest.raises(DatasetLayoutError, match="000_mask.png"):
        load_mvtec_class(tmp_path, "carpet")


def test_move_anomalies_to_train(tmp_path):
    _mock_class(tmp_path, defects=4)
    train, test = load_mvtec_class(tmp_path, "carpet")
    new_train, new_test, moved = move_anomalies_to_train(train, test, 0.5, RngStream(0))
    assert len(moved) == 2
    assert len(new_train) == 4 and len(new_test) == 3
    assert sum(new_train.labels) == 2
    assert new_test.has_both_classes()
    assert set(moved).isdisjoint(item.name for item in new_test.items)

    _, _, again = move_anomalies_to_train(train, test, 0.5, RngStream(0))
    assert again == moved


def test_move_anomalies_keeps_one_in_test(tmp_path):
    _mock_class(tmp_path, defects=2)
    train, test = load_mvtec_class(tmp_path, "carpet")
    new_train, new_test, moved = move_anomalies_to_train(train, test, 0.9, RngStream(0))
    assert len(moved) == 1
    assert new_test.has_both_classes()
    assert sorted(new_test.labels) == [0, 1]
    assert sum(new_train.labels) == 1

    _mock_class(tmp_path / "single", defects=1)
    train, test = load_mvtec_class(tmp_path / "single", "carpet")
    _, kept_test, none_moved = move_anomalies_to_train(train, test, 0.5, RngStream(0))
    assert none_moved == [] and kept_test.has_both_classes()


def test_load_resize_synthesize_is_bit_identical(tmp_path):
    rng = np.random.default_rng(4)
    path = tmp_path / "texture.png"
    _png(path, rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8))
    grid = WavelengthGrid.linear(300.0, 1100.0, 300)

    def run() -> np.ndarray:
        return synthesize_hsi(resize_bilinear(decode_rgb(path), 16, 16), grid).values

    first, second = run(), run()
    assert first.shape == (300, 16, 16)
    assert np.array_equal(first, second)
