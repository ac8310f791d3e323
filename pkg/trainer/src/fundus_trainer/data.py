"""File-interface ingestion: manifest CSV, split CSV and the preprocessed
PNG tree (out/<side>/<image_id>.png) produced by the evaluation toolkit.

Grading semantics of the manifest columns are part of that wire format:
grades pirc 0-4 and pimec 0-3 apply only to gradable rows, referable
retinopathy means pirc >= 2, referable edema means pimec >= 1, and qrdr is
{0: ungradable, 1: non-referable, 2: referable}.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .errors import DataMismatch, RangeError

MANIFEST_COLUMNS = ("image_id", "patient_id", "eye", "field", "gradable",
                    "pirc", "pimec")
SET_NAMES = ("train", "tune", "validation")

SYSTEM_CLASSES = {"pirc": 5, "pimec": 4, "rdr": 2, "rdme": 2, "qrdr": 3}


def class_count(system: str) -> int:
    try:
        return SYSTEM_CLASSES[system]
    except KeyError:
        raise RangeError(f"unknown grading system {system!r}") from None


def _label_for(system: str, gradable: bool, pirc, pimec):
    """Class index under `system`, or None when the row is unusable."""
    if system == "qrdr":
        if not gradable:
            return 0
        return 2 if pirc >= 2 else 1
    if not gradable:
        return None
    if system == "pirc":
        return pirc
    if system == "rdr":
        return int(pirc >= 2)
    if system == "pimec":
        return pimec
    return int(pimec >= 1)


@dataclass(frozen=True)
class TrainItem:
    image_id: str
    patient_id: str
    path: Path
    label: int


def _read_manifest(path: Path):
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = tuple(h.strip() for h in next(reader))
        if header[:7] != MANIFEST_COLUMNS:
            raise DataMismatch(f"unexpected manifest header in {path}")
        for row in reader:
            if not row:
                continue
            gradable = row[4].strip() == "1"
            pirc = int(row[5]) if row[5].strip() else None
            pimec = int(row[6]) if row[6].strip() else None
            yield row[0].strip(), row[1].strip(), gradable, pirc, pimec


def _read_split(path: Path) -> dict:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = tuple(h.strip() for h in next(reader))
        if header != ("image_id", "set"):
            raise DataMismatch(f"unexpected split header in {path}")
        out = {}
        for row in reader:
            if not row:
                continue
            if row[1].strip() not in SET_NAMES:
                raise DataMismatch(f"unknown set name {row[1]!r} in {path}")
            out[row[0].strip()] = row[1].strip()
    return out


def load_dataset(
    manifest_path: Path | str,
    split_path: Path | str,
    images_dir: Path | str,
    system: str,
    input_side: int,
) -> dict:
    """Items per set name, labels derived for `system`, paths checked.

    The split must only reference images that exist in the manifest and in
    the size tree; anything else is a DataMismatch.
    """
    class_count(system)
    labels = {}
    patients = {}
    for image_id, patient_id, gradable, pirc, pimec in _read_manifest(Path(manifest_path)):
        label = _label_for(system, gradable, pirc, pimec)
        if label is not None:
            labels[image_id] = label
            patients[image_id] = patient_id

    split = _read_split(Path(split_path))
    unknown = sorted(set(split) - set(labels))
    if unknown:
        raise DataMismatch(
            f"split references {len(unknown)} image(s) unknown to the manifest "
            f"under system {system!r} (first: {unknown[0]!r})")

    size_dir = Path(images_dir) / str(input_side)
    out = {name: [] for name in SET_NAMES}
    missing = []
    for image_id in sorted(split):
        path = size_dir / f"{image_id}.png"
        if not path.is_file():
            missing.append(image_id)
            continue
        out[split[image_id]].append(TrainItem(
            image_id=image_id, patient_id=patients[image_id],
            path=path, label=labels[image_id]))
    if missing:
        raise DataMismatch(
            f"{len(missing)} split image(s) missing from {size_dir} "
            f"(first: {missing[0]!r})")
    return out


def _load_tensor(path: Path) -> torch.Tensor:
    with Image.open(path) as im:
        array = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return torch.from_numpy(array).permute(2, 0, 1)


class FundusDataset(torch.utils.data.Dataset):
    def __init__(self, items):
        self.items = list(items)

    def __len__(self):
        return len(self.items)

    def __getitem__(self, index):
        item = self.items[index]
        return _load_tensor(item.path), item.label
