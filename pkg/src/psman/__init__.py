"""Optimization on partitioned subspace manifolds, with multiple-dataset PCA
and class-discriminative transfer subspaces built on top."""

from psman.cdt import CdtModel, classify_gaussian_nb, classify_nearest_centroid, fit_cdt
from psman.errors import ConfigError, DataError, NumericalError, PsmanError
from psman.kernels import BACKEND
from psman.manifold import PartitionSpec, PSPoint, TangentVector, random_point
from psman.mdpca import MdpcaModel, fit_mdpca, pca_baseline, variance_explained
from psman.optim import LossProblem, OptimizerConfig, Termination, minimize

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CdtModel",
    "ConfigError",
    "DataError",
    "LossProblem",
    "MdpcaModel",
    "NumericalError",
    "OptimizerConfig",
    "PSPoint",
    "PartitionSpec",
    "PsmanError",
    "TangentVector",
    "Termination",
    "classify_gaussian_nb",
    "classify_nearest_centroid",
    "fit_cdt",
    "fit_mdpca",
    "minimize",
    "pca_baseline",
    "random_point",
    "variance_explained",
]
