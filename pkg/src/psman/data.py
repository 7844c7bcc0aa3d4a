"""Dataset containers and z-score normalization."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from psman.errors import DataError, EmptyClass
from psman.linalg import as_mat


@dataclass(frozen=True)
class Normalization:
    """Per-feature statistics that were subtracted and divided out."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, x):
        scale = np.where(self.std > 0, self.std, 1.0)
        return (np.asarray(x, dtype=np.float64) - self.mean) / scale


@dataclass(frozen=True)
class Dataset:
    """Samples as rows, features as columns."""

    x: np.ndarray
    name: str = "data"
    normalization: Optional[Normalization] = None

    def __post_init__(self):
        object.__setattr__(self, "x", as_mat(self.x, self.name))

    @property
    def n_samples(self):
        return self.x.shape[0]

    @property
    def n_features(self):
        return self.x.shape[1]


@dataclass(frozen=True)
class LabeledDataset:
    """Samples with integer labels in ``1..L`` (L >= 2, every class non-empty)."""

    x: np.ndarray
    y: np.ndarray
    name: str = "source"
    # original label tokens, label_names[c - 1] for class c
    label_names: Optional[tuple] = None

    def __post_init__(self):
        x = as_mat(self.x, self.name)
        y = np.asarray(self.y).astype(np.int64).ravel()
        if y.shape[0] != x.shape[0]:
            raise DataError(f"{x.shape[0]} samples but {y.shape[0]} labels")
        if y.size and y.min() < 1:
            raise DataError("labels must be positive integers 1..L")
        n_classes = int(y.max()) if y.size else 0
        if n_classes < 2:
            raise DataError("at least two classes are required")
        counts = np.bincount(y, minlength=n_classes + 1)[1:]
        if np.any(counts == 0):
            missing = [int(c) + 1 for c in np.flatnonzero(counts == 0)]
            raise EmptyClass(f"classes with no samples: {missing}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.label_names is None:
            object.__setattr__(self, "label_names", tuple(str(c) for c in range(1, n_classes + 1)))
        elif len(self.label_names) < n_classes:
            raise DataError("fewer label names than classes")

    @property
    def n_classes(self):
        return int(self.y.max())


def zscore(x):
    """Center each feature and scale it to unit (population) standard deviation.

    Constant features are centered and left at zero. Returns the normalized
    array and the :class:`Normalization` that produced it.
    """
    x = as_mat(x)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    # constant columns: treat round-off spread as zero
    std = np.where(std > 1e-12 * np.maximum(1.0, np.abs(mean)), std, 0.0)
    norm = Normalization(mean=mean, std=std)
    return norm.apply(x), norm


def normalized(dataset):
    x, norm = zscore(dataset.x)
    return Dataset(x, dataset.name, norm)
