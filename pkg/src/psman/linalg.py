"""Dense real-matrix primitives used throughout the package."""
import numpy as np

from psman import kernels
from psman.errors import DataError, NonSquare, NotOrthonormal, RankDeficient, ShapeMismatch

RANK_TOL = 1e-12
ORTHO_TOL = 1e-8


def as_mat(m, name="matrix"):
    """Validate and return ``m`` as a finite 2-D float64 array."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeMismatch(f"{name} must be non-empty, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataError(f"{name} contains NaN or Inf")
    return a


def qr_positive(m, tol=RANK_TOL):
    """Thin QR factorization with a strictly positive R diagonal.

    Parameters
    ----------
    m : array-like, shape (n, k)
        Full column rank input, n >= k.
    tol : float
        Relative rank threshold; a diagonal entry of R below
        ``tol * max column norm`` raises :class:`RankDeficient`.

    Returns
    -------
    q : ndarray, shape (n, k)
    r : ndarray, shape (k, k)
    """
    a = as_mat(m)
    n, k = a.shape
    if n < k:
        raise ShapeMismatch(f"qr_positive needs rows >= cols, got {a.shape}")
    q, r = kernels.householder_qr(a)
    threshold = tol * float(np.max(np.linalg.norm(a, axis=0)))
    diag = np.abs(np.diag(r))
    for j in range(k):
        if not diag[j] > threshold:
            raise RankDeficient(j, float(diag[j]), threshold)
    return q, r


def skew(m):
    """Skew-symmetric part 0.5 * (m - m.T)."""
    a = as_mat(m)
    if a.shape[0] != a.shape[1]:
        raise NonSquare(f"skew needs a square matrix, got {a.shape}")
    return 0.5 * (a - a.T)


def svd(m):
    """Thin SVD; singular values come back in descending order."""
    return np.linalg.svd(as_mat(m), full_matrices=False)


def frobenius_norm(m):
    return float(np.linalg.norm(np.asarray(m, dtype=np.float64)))


def orthonormality_defect(a):
    """Frobenius norm of ``a.T @ a - I``."""
    a = np.asarray(a, dtype=np.float64)
    return float(np.linalg.norm(a.T @ a - np.eye(a.shape[1])))


def principal_angles(a, b):
    """Principal angles (radians, ascending) between the spans of ``a`` and ``b``.

    Both inputs must have orthonormal columns.
    """
    a = as_mat(a, "a")
    b = as_mat(b, "b")
    if a.shape[0] != b.shape[0]:
        raise ShapeMismatch(f"ambient dimensions differ: {a.shape[0]} vs {b.shape[0]}")
    for name, x in (("a", a), ("b", b)):
        if np.max(np.abs(x.T @ x - np.eye(x.shape[1]))) > ORTHO_TOL:
            raise NotOrthonormal(f"{name} does not have orthonormal columns")
    cosines = np.linalg.svd(a.T @ b, compute_uv=False)
    # descending cosines give ascending angles
    return np.arccos(np.clip(cosines, 0.0, 1.0))


def random_orthogonal(n, seed):
    """Haar-distributed orthogonal matrix (up to the positive-diagonal QR convention)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    q, _ = qr_positive(rng.standard_normal((n, n)))
    return q
