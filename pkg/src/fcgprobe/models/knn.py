"""Brute-force k-nearest-neighbour classifier with Euclidean distance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateData, DimensionMismatch
from .labels import BENIGN, MALWARE


@dataclass
class KnnModel:
    data: np.ndarray
    labels: np.ndarray
    k: int = 1

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.data.ndim != 2 or len(self.data) != len(self.labels):
            raise DimensionMismatch("data must be (n, d) with one label per row")
        counts = [int(np.sum(self.labels == c)) for c in (MALWARE, BENIGN)]
        if min(counts) == 0:
            raise DegenerateData("need at least one row per class")
        if not 1 <= self.k <= min(counts):
            raise ValueError(f"k={self.k} exceeds the smallest class size")

    @property
    def input_dim(self) -> int:
        return self.data.shape[1]

    def _dist(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            raise DimensionMismatch(f"expected {self.input_dim} features, got {x.shape}")
        return np.sqrt(((self.data - x) ** 2).sum(axis=1))


def knn_distances(m: KnnModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Ascending distances to the k nearest malware rows and the k nearest benign rows."""
    d = m._dist(x)
    mal = np.sort(d[m.labels == MALWARE])[: m.k]
    ben = np.sort(d[m.labels == BENIGN])[: m.k]
    return mal, ben


def knn_predict(m: KnnModel, x) -> int:
    """Majority label over the k nearest rows; ties go to malware.

    Among rows at equal distance malware rows are taken first, so a benign
    verdict is never the product of an arbitrary tie order.
    """
    d = m._dist(x)
    # malware first among equal distances
    order = np.lexsort((m.labels != MALWARE, d))[: m.k]
    n_mal = int(np.sum(m.labels[order] == MALWARE))
    return BENIGN if m.k - n_mal > n_mal else MALWARE
