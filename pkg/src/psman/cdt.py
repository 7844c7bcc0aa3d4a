"""Class-discriminative transfer subspaces for domain adaptation.

One partition of size ``k_pc`` per source class. The loss is

    ||X_s - X_s Q Q^T||^2 + ||X_t - X_t Q Q^T||^2
        - lam * sum_{x in X_s} (||x Q_y Q_y^T||^2 - ||x Q_ybar Q_ybar^T||^2)

where ``Q_y`` is the partition of the sample's class and ``Q_ybar`` the
union of the other class partitions. Samples are rows. As in
:mod:`psman.mdpca` the loss is evaluated in its captured-energy form, valid
on orthonormal ``Q``; with per-class scatter ``M_c`` and ``G = X_s^T X_s +
X_t^T X_t`` the ambient gradient for partition ``c`` is

    -2 (G + lam * (M_c - sum_{c' != c} M_c')) Q_c.
"""
from dataclasses import dataclass

import numpy as np

from psman.data import LabeledDataset
from psman.errors import ConfigError, ShapeMismatch
from psman.linalg import as_mat
from psman.manifold import PartitionSpec, PSPoint, partition_cols, random_point, representative
from psman.optim import LossProblem, OptimizerConfig, minimize

DEFAULT_LAMBDA = 2.0
VAR_FLOOR = 1e-9


@dataclass(frozen=True)
class CdtModel:
    point: PSPoint
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        sizes = set(self.point.spec.sizes)
        if len(sizes) != 1:
            raise ConfigError("class partitions must all have the same size")
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")

    @property
    def spec(self):
        return self.point.spec

    @property
    def n_classes(self):
        return self.spec.m

    @property
    def k_pc(self):
        return self.spec.sizes[0]

    def class_cols(self, label):
        """Partition of class ``label`` (labels are 1-based)."""
        return partition_cols(self.point, label - 1)


def cdt_spec(n, n_classes, k_pc):
    if k_pc < 1:
        raise ConfigError("k_pc must be >= 1")
    if k_pc * n_classes > n:
        raise ConfigError(
            f"k_pc * L = {k_pc * n_classes} exceeds the feature dimension {n}"
        )
    return PartitionSpec(n, (k_pc,) * n_classes)


def _target_matrix(target, n):
    x = target.x if hasattr(target, "x") else target
    x = as_mat(x, "target")
    if x.shape[1] != n:
        raise ShapeMismatch(f"target has {x.shape[1]} features, source has {n}")
    return x


def _check(spec, source):
    if source.x.shape[1] != spec.n:
        raise ShapeMismatch(f"source has {source.x.shape[1]} features, manifold dimension is {spec.n}")
    if source.n_classes != spec.m:
        raise ShapeMismatch(f"source has {source.n_classes} classes, model has {spec.m} partitions")


class CdtObjective:
    def __init__(self, source, target, spec, lam):
        xt = _target_matrix(target, source.x.shape[1])
        _check(spec, source)
        gs = source.x.T @ source.x
        gt = xt.T @ xt
        self.spec = spec
        self.lam = float(lam)
        self.total_energy = float(np.trace(gs) + np.trace(gt))
        scatter = [source.x[source.y == c].T @ source.x[source.y == c] for c in range(1, spec.m + 1)]
        # per-class weight matrix: G + lam * (M_c - (G_s - M_c))
        self.weights = [gs + gt + self.lam * (2.0 * m - gs) for m in scatter]
        self._cols = [slice(*spec.partition_range(i)) for i in range(spec.m)]

    def loss(self, y):
        captured = 0.0
        for cols, w in zip(self._cols, self.weights):
            qc = y[:, cols]
            captured += np.sum(qc * (w @ qc))
        return self.total_energy - float(captured)

    def grad(self, y):
        out = np.zeros_like(y)
        for cols, w in zip(self._cols, self.weights):
            out[:, cols] = -2.0 * w @ y[:, cols]
        return out

    def problem(self):
        return LossProblem(self.loss, self.grad)


def cdt_loss(model, source, target):
    xt = _target_matrix(target, source.x.shape[1])
    _check(model.spec, source)
    q = representative(model.point)
    rec = (
        np.sum(source.x**2) - np.sum((source.x @ q) ** 2)
        + np.sum(xt**2) - np.sum((xt @ q) ** 2)
    )
    disc = 0.0
    for c in range(1, model.n_classes + 1):
        xc = source.x[source.y == c]
        own = np.sum((xc @ model.class_cols(c)) ** 2)
        others = np.sum((xc @ q) ** 2) - own
        disc += own - others
    return float(rec - model.lam * disc)


def cdt_grad(model, source, target):
    obj = CdtObjective(source, target, model.spec, model.lam)
    return obj.grad(representative(model.point))


def fit_cdt(source, target, k_pc=None, lam=DEFAULT_LAMBDA, config=None, seed=0):
    """Fit a CDT subspace; target labels are never used here.

    ``k_pc`` defaults to the largest admissible size ``n // L``.

    Returns
    -------
    (CdtModel, OptimizeReport)
    """
    n = source.x.shape[1]
    n_classes = source.n_classes
    if k_pc is None:
        k_pc = n // n_classes
    if lam < 0:
        raise ConfigError(f"lambda must be >= 0, got {lam}")
    spec = cdt_spec(n, n_classes, k_pc)
    problem = CdtObjective(source, target, spec, lam).problem()
    report = minimize(problem, random_point(spec, seed), config or OptimizerConfig())
    return CdtModel(report.final, lam), report


def project(model, x):
    """Coordinates of the rows of ``x`` in the k learned directions."""
    return as_mat(x) @ representative(model.point)


class GaussianNB:
    """Gaussian naive Bayes with a variance floor."""

    def fit(self, x, y):
        x = as_mat(x)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        self.means_ = np.array([x[y == c].mean(axis=0) for c in self.classes_])
        self.vars_ = np.array([x[y == c].var(axis=0) for c in self.classes_]) + VAR_FLOOR
        self.log_priors_ = np.log(np.array([np.mean(y == c) for c in self.classes_]))
        return self

    def log_likelihood(self, x):
        x = as_mat(x)
        diff = x[:, None, :] - self.means_[None, :, :]
        ll = -0.5 * np.sum(np.log(2.0 * np.pi * self.vars_)[None] + diff**2 / self.vars_[None], axis=2)
        return ll + self.log_priors_[None, :]

    def predict(self, x):
        return self.classes_[np.argmax(self.log_likelihood(x), axis=1)]


class NearestCentroid:
    def fit(self, x, y):
        x = as_mat(x)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        self.centroids_ = np.array([x[y == c].mean(axis=0) for c in self.classes_])
        return self

    def predict(self, x):
        x = as_mat(x)
        d2 = np.sum((x[:, None, :] - self.centroids_[None]) ** 2, axis=2)
        return self.classes_[np.argmin(d2, axis=1)]


def accuracy(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ShapeMismatch(f"{pred.shape[0]} predictions for {truth.shape[0]} labels")
    return float(np.mean(pred == truth))


def _classify(classifier, model, source, target, target_labels):
    xt = _target_matrix(target, source.x.shape[1])
    xs = source.x
    if model is not None:
        xs, xt = project(model, xs), project(model, xt)
    pred = classifier.fit(xs, source.y).predict(xt)
    acc = None if target_labels is None else accuracy(pred, target_labels)
    return pred, acc


def classify_gaussian_nb(model, source, target, target_labels=None):
    """Train Gaussian NB on the (projected) source, predict the target.

    ``model=None`` classifies in the raw feature space. Returns
    ``(predictions, accuracy)``, accuracy None without target labels.
    """
    return _classify(GaussianNB(), model, source, target, target_labels)


def classify_nearest_centroid(model, source, target, target_labels=None):
    """Nearest class mean in the (projected) space; see :func:`classify_gaussian_nb`."""
    return _classify(NearestCentroid(), model, source, target, target_labels)
