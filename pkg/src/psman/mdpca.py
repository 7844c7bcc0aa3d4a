"""Multiple-dataset PCA.

Each of D datasets is reconstructed through its own partition plus one
partition shared by all of them. The loss is

    sum_i ||X_i - X_i S_i S_i^T||_F^2 / |X_i|,   S_i = [Q_i | Q_sh],

with |X_i| the sample count. On orthonormal S_i this equals
``sum_i (||X_i||^2 - ||X_i S_i||^2) / |X_i|``, which is the form evaluated
here: it depends on the data only through second-moment matrices, and its
ambient gradient is exactly ``-2 X_i^T X_i Q_i / |X_i|`` (per-dataset block)
and ``-2 (sum_i X_i^T X_i / |X_i|) Q_sh`` (shared block).
"""
from dataclasses import dataclass

import numpy as np

from psman.data import Dataset, normalized
from psman.errors import ConfigError, DatasetCountMismatch, ShapeMismatch, ZeroDataset
from psman.linalg import as_mat, svd
from psman.manifold import PartitionSpec, PSPoint, partition_cols, random_point
from psman.optim import LossProblem, OptimizerConfig, minimize

SHARED = "shared"
RESIDUAL = "residual"


def mdpca_spec(n, n_datasets, k_pd, k_sh):
    """Partition sizes ``[k_pd] * D + [k_sh]``.

    ``k_pd=None`` drops the per-dataset partitions, which is only meaningful
    for a single dataset: the manifold is then the Grassmannian ``[k_sh]``
    and the fit reduces to ordinary PCA.
    """
    if n_datasets < 1:
        raise ConfigError("at least one dataset is required")
    if k_pd is None:
        if n_datasets != 1:
            raise ConfigError("k_pd may only be omitted for a single dataset")
        return PartitionSpec(n, (k_sh,))
    return PartitionSpec(n, (k_pd,) * n_datasets + (k_sh,))


@dataclass(frozen=True)
class MdpcaModel:
    point: PSPoint
    names: tuple

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        m = self.point.spec.m
        if not (m == len(self.names) + 1 or (m == 1 and len(self.names) == 1)):
            raise DatasetCountMismatch(
                f"spec has {self.point.spec.m} partitions; expected one per dataset plus a shared one"
            )

    @property
    def spec(self):
        return self.point.spec

    @property
    def n_datasets(self):
        return len(self.names)

    @property
    def has_own(self):
        """False for the single-dataset model without a per-dataset partition."""
        return self.spec.m > 1

    @property
    def k_pd(self):
        return self.spec.sizes[0] if self.has_own else None

    @property
    def k_sh(self):
        return self.spec.sizes[-1]

    def per_dataset(self, i):
        return partition_cols(self.point, i)

    def shared(self):
        return partition_cols(self.point, self.spec.m - 1)


def _as_datasets(data):
    out = []
    for i, d in enumerate(data):
        out.append(d if isinstance(d, Dataset) else Dataset(as_mat(d), f"X{i + 1}"))
    if not out:
        raise DatasetCountMismatch("no datasets given")
    n = out[0].n_features
    for d in out:
        if d.n_features != n:
            raise ShapeMismatch(
                f"dataset {d.name!r} has {d.n_features} features, expected {n}"
            )
    return out


def _check(spec, datasets):
    if len(datasets) != max(spec.m - 1, 1):
        raise DatasetCountMismatch(
            f"model expects {max(spec.m - 1, 1)} datasets, got {len(datasets)}"
        )
    if datasets[0].n_features != spec.n:
        raise ShapeMismatch(
            f"data has {datasets[0].n_features} features, manifold dimension is {spec.n}"
        )


def gram_matrices(data):
    """Sample-normalized second moments ``X_i^T X_i / |X_i|``."""
    return [d.x.T @ d.x / d.n_samples for d in _as_datasets(data)]


class MdpcaObjective:
    """Loss and ambient gradient on the representative, from cached Gram matrices."""

    def __init__(self, grams, spec):
        self.grams = [np.asarray(g, dtype=np.float64) for g in grams]
        self.spec = spec
        self.total_energy = float(sum(np.trace(g) for g in self.grams))
        self.pooled = sum(self.grams)
        self._shared = slice(*spec.partition_range(spec.m - 1))
        self._own = [slice(*spec.partition_range(i)) for i in range(spec.m - 1)]

    def loss(self, y):
        qs = y[:, self._shared]
        captured = np.sum(qs * (self.pooled @ qs))
        for own, g in zip(self._own, self.grams):
            qi = y[:, own]
            captured += np.sum(qi * (g @ qi))
        return self.total_energy - float(captured)

    def grad(self, y):
        out = np.zeros_like(y)
        for own, g in zip(self._own, self.grams):
            out[:, own] = -2.0 * g @ y[:, own]
        out[:, self._shared] = -2.0 * self.pooled @ y[:, self._shared]
        return out

    def problem(self):
        return LossProblem(self.loss, self.grad)


def mdpca_objective(data, spec):
    datasets = _as_datasets(data)
    _check(spec, datasets)
    return MdpcaObjective(gram_matrices(datasets), spec)


def mdpca_loss(model, data):
    datasets = _as_datasets(data)
    _check(model.spec, datasets)
    qs = model.shared()
    total = 0.0
    for i, d in enumerate(datasets):
        s = np.hstack([model.per_dataset(i), qs]) if model.has_own else qs
        total += (np.sum(d.x**2) - np.sum((d.x @ s) ** 2)) / d.n_samples
    return float(total)


def mdpca_grad(model, data):
    y = model.point.q[:, : model.spec.k]
    return mdpca_objective(data, model.spec).grad(y)


def fit_mdpca(data, k_pd, k_sh, config=None, seed=0, normalize=False, restarts=1):
    """Fit MD-PCA by Riemannian gradient descent from a random orthogonal start.

    With ``restarts > 1`` the fit is repeated from seeds ``seed, seed + 1, ...``
    and the lowest-loss result is kept.

    Returns
    -------
    (MdpcaModel, OptimizeReport)
    """
    datasets = _as_datasets(data)
    if normalize:
        datasets = [normalized(d) for d in datasets]
    if restarts < 1:
        raise ConfigError("restarts must be >= 1")
    spec = mdpca_spec(datasets[0].n_features, len(datasets), k_pd, k_sh)
    problem = mdpca_objective(datasets, spec).problem()
    config = config or OptimizerConfig()
    best = None
    for r in range(restarts):
        report = minimize(problem, random_point(spec, seed + r), config)
        if best is None or report.loss_trace[-1] < best.loss_trace[-1]:
            best = report
    names = tuple(d.name for d in datasets)
    return MdpcaModel(best.final, names), best


def variance_explained(model, data):
    """Fraction of each dataset's energy captured by each partition.

    Returns rows ``(dataset, partition, fraction)``; per-dataset partitions
    are labelled by dataset name, followed by ``"shared"`` and ``"residual"``
    (the uncaptured remainder). Fractions of one dataset sum to 1.
    """
    datasets = _as_datasets(data)
    _check(model.spec, datasets)
    labels = (list(model.names) if model.has_own else []) + [SHARED]
    rows = []
    for d in datasets:
        energy = float(np.sum(d.x**2))
        if energy == 0.0:
            raise ZeroDataset(f"dataset {d.name!r} has zero energy")
        captured = 0.0
        for j, label in enumerate(labels):
            frac = float(np.sum((d.x @ partition_cols(model.point, j)) ** 2)) / energy
            captured += frac
            rows.append((d.name, label, frac))
        rows.append((d.name, RESIDUAL, 1.0 - captured))
    return rows


def pca_baseline(x, k):
    """Top-k right singular vectors of ``x`` (top-k eigenvectors of ``x.T @ x``).

    When eigenvalues tie at the cut the optimal subspace is not unique and
    any basis of a tied eigenspace is equally valid.
    """
    x = as_mat(x)
    if not 1 <= k <= x.shape[1]:
        raise ConfigError(f"k must lie in 1..{x.shape[1]}, got {k}")
    if x.shape[0] >= x.shape[1]:
        _, _, vt = svd(x)
        return vt[:k].T.copy()
    # fewer samples than features: the thin SVD lacks trailing directions
    _, vecs = np.linalg.eigh(x.T @ x)
    return vecs[:, ::-1][:, :k].copy()
