"""Per-cell recognition: a small CNN and a nearest-centroid baseline behind one interface."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from gridscan.errors import EmptyDataset, FormatError
from gridscan.imaging import load_image
from gridscan.recognizer.centroid import CentroidModel, centroid_fit
from gridscan.recognizer.features import INPUT_SIZE, cell_input, normalize_ink
from gridscan.recognizer.network import (
    NetworkArch,
    NetworkWeights,
    TrainConfig,
    default_arch,
    load_weights,
    predict_proba,
    save_weights,
    train,
)

DIGITS = tuple(str(i) for i in range(10))


@dataclass(frozen=True)
class Prediction:
    label: int
    confidence: float
    is_empty: bool
    text: str = ""


class Recognizer(Protocol):
    classes: tuple[str, ...]

    def predict_inputs(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...


@dataclass
class CnnRecognizer:
    arch: NetworkArch
    weights: NetworkWeights
    classes: tuple[str, ...] = DIGITS

    def __post_init__(self):
        self.weights.check(self.arch)

    @classmethod
    def from_file(cls, path, classes: tuple[str, ...] = DIGITS) -> "CnnRecognizer":
        return cls(default_arch(len(classes)), load_weights(path), classes)

    def predict_inputs(self, x):
        x = np.asarray(x, dtype=np.float32)
        if x.ndim == 3:
            x = x[:, None]
        probs = predict_proba(self.arch, self.weights, x)
        labels = probs.argmax(axis=1)
        return labels, probs[np.arange(len(probs)), labels]


def predict_cell(
    model: Recognizer, cell: np.ndarray, empty_threshold: float = 0.01, block: int = 15, c: float = 8
) -> Prediction:
    """Recognize one gray cell crop; near-inkless crops come back ``is_empty``."""
    if cell.ndim != 2 or min(cell.shape) < 3:
        return Prediction(-1, 0.0, True)
    x, fill = cell_input(cell, block, c)
    if fill < empty_threshold:
        return Prediction(-1, 0.0, True)
    labels, conf = model.predict_inputs(x[None, None])
    label = int(labels[0])
    return Prediction(label, float(conf[0]), False, model.classes[label])


def predict_cells(model: Recognizer, cells: Sequence[np.ndarray], empty_threshold: float = 0.01, block: int = 15, c: float = 8) -> list[Prediction]:
    """Batched :func:`predict_cell`."""
    preds: list[Prediction | None] = [None] * len(cells)
    xs, idx = [], []
    for i, cell in enumerate(cells):
        if cell.ndim != 2 or min(cell.shape) < 3:
            preds[i] = Prediction(-1, 0.0, True)
            continue
        x, fill = cell_input(cell, block, c)
        if fill < empty_threshold:
            preds[i] = Prediction(-1, 0.0, True)
        else:
            xs.append(x)
            idx.append(i)
    if xs:
        labels, conf = model.predict_inputs(np.stack(xs)[:, None])
        for i, lab, cf in zip(idx, labels, conf):
            preds[i] = Prediction(int(lab), float(cf), False, model.classes[int(lab)])
    return preds  # type: ignore[return-value]


@dataclass
class LabeledDataset:
    """``x``: float32 ``(n, 32, 32)`` in [0, 1]; ``y``: class ids."""

    x: np.ndarray
    y: np.ndarray
    classes: tuple[str, ...] = DIGITS

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.intp)
        return LabeledDataset(self.x[idx], self.y[idx], self.classes)

    def batch(self) -> np.ndarray:
        return self.x[:, None].astype(np.float32)


def to_input(img: np.ndarray) -> np.ndarray:
    """A sample image (any size, dark ink on light paper or already 32x32) to [0, 1] input."""
    if img.shape == (INPUT_SIZE, INPUT_SIZE):
        return (img / np.float32(255)).astype(np.float32)
    return normalize_ink(img < 128)


def load_dataset(data_dir: str | os.PathLike, labels_csv: str | os.PathLike, classes: tuple[str, ...] = DIGITS) -> LabeledDataset:
    """Ingest a directory of PGMs listed in a ``filename,label`` CSV.

    32x32 images are taken as-is (ink bright, /255). Anything else is treated
    as dark ink on light paper and normalized like a cell crop.
    """
    data_dir = Path(data_dir)
    xs, ys = [], []
    index = {c: i for i, c in enumerate(classes)}
    with open(labels_csv, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().lower() == "filename":
                continue
            if len(row) != 2:
                raise FormatError(f"labels row must be 'filename,label': {row!r}")
            name, label = row[0].strip(), row[1].strip()
            if label not in index:
                raise FormatError(f"unknown label {label!r} for {name}")
            img = load_image(data_dir / name)
            if img.ndim == 3:
                raise FormatError(f"{name}: dataset images must be grayscale")
            xs.append(to_input(img))
            ys.append(index[label])
    if not xs:
        raise EmptyDataset(f"no samples listed in {labels_csv}")
    return LabeledDataset(np.stack(xs), np.array(ys, dtype=np.int64), classes)


__all__ = [
    "DIGITS",
    "CentroidModel",
    "CnnRecognizer",
    "LabeledDataset",
    "Prediction",
    "Recognizer",
    "TrainConfig",
    "centroid_fit",
    "default_arch",
    "load_dataset",
    "load_weights",
    "predict_cell",
    "predict_cells",
    "save_weights",
    "train",
]
