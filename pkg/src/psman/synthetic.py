"""Planted instances with known ground-truth subspaces."""
from dataclasses import dataclass

import numpy as np

from psman.data import Dataset, LabeledDataset
from psman.linalg import random_orthogonal


@dataclass(frozen=True)
class PlantedMdpca:
    datasets: list
    shared: np.ndarray  # (n, s) basis of the shared directions
    unique: list  # per-dataset (n, u) bases
    noise: float


def planted_mdpca(seed, n=8, n_datasets=2, n_shared=1, n_unique=1, n_samples=200,
                  noise=0.01, shared_scales=None, unique_scale=1.0):
    """Datasets spanned by common directions plus one private set each.

    Dataset ``i`` is ``C_s S^T + C_i U_i^T + noise * E`` with standard normal
    coefficient matrices scaled per direction; all planted directions are
    mutually orthonormal.
    """
    rng = np.random.default_rng(seed)
    need = n_shared + n_datasets * n_unique
    if need > n:
        raise ValueError(f"{need} planted directions do not fit in dimension {n}")
    basis = random_orthogonal(n, int(rng.integers(2**31)))
    shared = basis[:, :n_shared]
    unique = [
        basis[:, n_shared + i * n_unique : n_shared + (i + 1) * n_unique]
        for i in range(n_datasets)
    ]
    scales = np.ones(n_shared) if shared_scales is None else np.asarray(shared_scales, float)
    datasets = []
    for i in range(n_datasets):
        cs = rng.standard_normal((n_samples, n_shared)) * scales
        cu = rng.standard_normal((n_samples, n_unique)) * unique_scale
        x = cs @ shared.T + cu @ unique[i].T + noise * rng.standard_normal((n_samples, n))
        datasets.append(Dataset(x, f"X{i + 1}"))
    return PlantedMdpca(datasets, shared, unique, noise)


@dataclass(frozen=True)
class PlantedTransfer:
    source: LabeledDataset
    target: np.ndarray
    target_labels: np.ndarray
    class_bases: list  # per-class (n, d) planted subspaces
    nuisance: np.ndarray  # (n,) domain-specific direction


def planted_transfer(seed, n=10, n_classes=2, dim=2, n_per_class=100, mean=1.0,
                     noise=0.1, nuisance=0.3):
    """Two-domain classification task with class subspaces shared across domains.

    A sample of class ``c`` has coefficients ``N(mean, 1)`` in the planted
    subspace of that class plus isotropic noise. Along one extra direction
    the source carries a class-correlated offset (+nuisance for odd classes,
    -nuisance for even ones) that is reversed in the target, so a classifier
    on raw features picks up a cue that does not transfer.
    """
    rng = np.random.default_rng(seed)
    if n_classes * dim + 1 > n:
        raise ValueError("planted subspaces and nuisance direction do not fit")
    basis = random_orthogonal(n, int(rng.integers(2**31)))
    bases = [basis[:, c * dim : (c + 1) * dim] for c in range(n_classes)]
    w = basis[:, n_classes * dim]

    def domain(sign):
        xs, ys = [], []
        for c in range(n_classes):
            coef = mean + rng.standard_normal((n_per_class, dim))
            offset = sign * nuisance * (1.0 if c % 2 == 0 else -1.0)
            x = coef @ bases[c].T + offset * w + noise * rng.standard_normal((n_per_class, n))
            xs.append(x)
            ys.append(np.full(n_per_class, c + 1))
        return np.vstack(xs), np.concatenate(ys)

    xs, ys = domain(+1.0)
    xt, yt = domain(-1.0)
    return PlantedTransfer(LabeledDataset(xs, ys), xt, yt, bases, w)
