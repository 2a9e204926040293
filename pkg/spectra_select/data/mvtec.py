from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from spectra_select.data.cube import resize_bilinear
from spectra_select.errors import DatasetIOError, DatasetLayoutError, PreconditionError
from spectra_select.models import LabeledDataset, LabeledItem, Split
from spectra_select.numeric.core import RngStream

logger = logging.getLogger(__name__)

GOOD_DIR = "good"
TEXTURE_CLASSES = ["carpet", "leather", "tile", "wood"]


def decode_rgb(path: Path) -> np.ndarray:
    """Decode an 8-bit PNG to H x W x 3 floats in [0, 1]; gray is replicated."""
    try:
        with Image.open(path) as img:
            rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
    except (UnidentifiedImageError, OSError) as exc:
        raise DatasetIOError(f"cannot decode image {path}: {exc}") from exc
    return rgb / 255.0


def decode_mask(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            mask = np.asarray(img.convert("L"))
    except (UnidentifiedImageError, OSError) as exc:
        raise DatasetIOError(f"cannot decode mask {path}: {exc}") from exc
    return (mask > 0).astype(np.uint8)


def _find_mask(gt_dir: Path, stem: str) -> Optional[Path]:
    for candidate in (gt_dir / f"{stem}_mask.png", gt_dir / f"{stem}.png"):
        if candidate.is_file():
            return candidate
    return None


def _resize_item(rgb: np.ndarray, mask: Optional[np.ndarray], size: Optional[int]):
    if size is None:
        return rgb, mask
    rgb = resize_bilinear(rgb, size, size)
    if mask is not None:
        mask = (resize_bilinear(mask.astype(np.float64), size, size) >= 0.5).astype(np.uint8)
    return rgb, mask


def load_mvtec_class(
    root: Union[str, Path],
    class_name: str,
    size: Optional[int] = None,
) -> Tuple[LabeledDataset, LabeledDataset]:
    """
    Load one MVTec AD class as (train, test) datasets of RGB images.

    Layout: <root>/<class>/train/good, <root>/<class>/test/<defect>,
    <root>/<class>/ground_truth/<defect>/<stem>_mask.png. Items are ordered
    lexicographically by defect directory then file name. When `size` is set
    images and masks are resized to size x size after the shape checks.
    """
    class_dir = Path(root) / class_name
    if not class_dir.is_dir():
        raise DatasetIOError(f"class directory not found: {class_dir}")
    train_dir = class_dir / "train" / GOOD_DIR
    test_dir = class_dir / "test"
    if not train_dir.is_dir():
        raise DatasetLayoutError(f"missing {train_dir}")
    if not test_dir.is_dir():
        raise DatasetLayoutError(f"missing {test_dir}")

    train_items: List[LabeledItem] = []
    for path in sorted(train_dir.glob("*.png")):
        rgb, _ = _resize_item(decode_rgb(path), None, size)
        train_items.append(LabeledItem(name=f"train/good/{path.name}", data=rgb, label=0))

    test_items: List[LabeledItem] = []
    for defect_dir in sorted(p for p in test_dir.iterdir() if p.is_dir()):
        defect = defect_dir.name
        for path in sorted(defect_dir.glob("*.png")):
            rgb = decode_rgb(path)
            mask = None
            if defect != GOOD_DIR:
                mask_path = _find_mask(class_dir / "ground_truth" / defect, path.stem)
                if mask_path is None:
                    raise DatasetLayoutError(f"no ground-truth mask for {path}")
                mask = decode_mask(mask_path)
                if mask.shape != rgb.shape[:2]:
                    raise DatasetLayoutError(
                        f"mask {mask_path} has shape {mask.shape}, image is {rgb.shape[:2]}"
                    )
            rgb, mask = _resize_item(rgb, mask, size)
            label = 0 if mask is None else int(mask.any())
            if defect != GOOD_DIR and label == 0:
                logger.warning("%s/%s has an empty mask; labeled normal", defect, path.name)
            if mask is None:
                mask = np.zeros(rgb.shape[:2], dtype=np.uint8)
            test_items.append(
                LabeledItem(name=f"test/{defect}/{path.name}", data=rgb, label=label, mask=mask)
            )

    logger.info(
        "Loaded %s: %d train, %d test (%d anomalous)",
        class_name,
        len(train_items),
        len(test_items),
        sum(item.label for item in test_items),
    )
    return (
        LabeledDataset(items=train_items, split=Split.TRAIN),
        LabeledDataset(items=test_items, split=Split.TEST),
    )


def move_anomalies_to_train(
    train: LabeledDataset,
    test: LabeledDataset,
    fraction: float,
    rng: RngStream,
) -> Tuple[LabeledDataset, LabeledDataset, List[str]]:
    """
    Move a seeded fraction of the anomalous test items into training.

    MVTec training folders hold only normal images; a supervised scorer needs
    both classes. Returns the new (train, test) and the moved item names.
    """
    if not 0.0 <= fraction < 1.0:
        raise PreconditionError(f"split fraction must be in [0, 1), got {fraction}")
    anomalous = [i for i, item in enumerate(test.items) if item.label == 1]
    n_move = int(round(fraction * len(anomalous)))
    # at least one anomaly stays behind so the test split keeps both classes
    if anomalous and n_move > len(anomalous) - 1:
        logger.warning(
            "Split fraction %.2f would empty the anomalous test set; moving %d of %d",
            fraction, len(anomalous) - 1, len(anomalous),
        )
        n_move = len(anomalous) - 1
    chosen = set(rng.generator.choice(anomalous, size=n_move, replace=False).tolist()) if n_move else set()

    moved = [test.items[i] for i in sorted(chosen)]
    kept = [item for i, item in enumerate(test.items) if i not in chosen]
    logger.info("Moved %d of %d anomalous test items into training", n_move, len(anomalous))
    return (
        LabeledDataset(items=train.items + moved, split=Split.TRAIN, grid=train.grid),
        LabeledDataset(items=kept, split=Split.TEST, grid=test.grid),
        [item.name for item in moved],
    )
