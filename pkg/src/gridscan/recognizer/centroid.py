"""Nearest-centroid baseline recognizer."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from gridscan.errors import EmptyDataset, FormatError
from gridscan.recognizer.layers import softmax


@dataclass
class CentroidModel:
    centroids: np.ndarray  # (k, d); rows of classes without samples are NaN
    classes: tuple[str, ...]

    def distances(self, x: np.ndarray) -> np.ndarray:
        flat = x.reshape(len(x), -1).astype(np.float64)
        d = np.sqrt(((flat[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=-1))
        return np.where(np.isnan(d), np.inf, d)

    def predict_inputs(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Labels and confidences; ties go to the lowest class id."""
        d = self.distances(x)
        labels = d.argmin(axis=1)
        probs = softmax(-d)
        return labels, probs[np.arange(len(d)), labels]

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "wb") as fh:
            np.savez(fh, centroids=self.centroids, classes=np.array(self.classes))

    @classmethod
    def load(cls, path: str | os.PathLike) -> "CentroidModel":
        try:
            with np.load(path, allow_pickle=False) as z:
                return cls(z["centroids"], tuple(str(c) for c in z["classes"]))
        except (ValueError, KeyError) as exc:
            raise FormatError(f"not a centroid model: {path}") from exc


def centroid_fit(x: np.ndarray, y: np.ndarray, classes: tuple[str, ...] | None = None) -> CentroidModel:
    """Per-class mean of the flattened inputs."""
    if len(x) == 0:
        raise EmptyDataset("cannot fit centroids on an empty dataset")
    y = np.asarray(y)
    if classes is None:
        classes = tuple(str(i) for i in range(int(y.max()) + 1))
    flat = x.reshape(len(x), -1).astype(np.float64)
    cents = np.full((len(classes), flat.shape[1]), np.nan)
    for k in range(len(classes)):
        members = flat[y == k]
        if len(members):
            cents[k] = members.mean(axis=0)
    return CentroidModel(cents, tuple(classes))
