"""The partitioned subspace manifold.

A point is an equivalence class of n x n orthogonal matrices: two matrices
are identified when they differ by independent rotations inside each column
block of sizes ``k_1, ..., k_m`` and inside the trailing ``n - k`` block.
Points are stored as one full orthogonal representative.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from psman import kernels
from psman.errors import ConfigError, NotOrthonormal, ShapeMismatch, SpecMismatch
from psman.linalg import as_mat, orthonormality_defect, qr_positive, random_orthogonal

TOL = 1e-10
REPAIR_TOL = 1e-6


@dataclass(frozen=True)
class PartitionSpec:
    """Ambient dimension ``n`` and ordered partition sizes."""

    n: int
    sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "n", int(self.n))
        if not sizes:
            raise ConfigError("at least one partition is required")
        if any(s < 1 for s in sizes):
            raise ConfigError(f"partition sizes must be >= 1, got {list(sizes)}")
        if sum(sizes) > self.n:
            raise ConfigError(
                f"partition sizes sum to {sum(sizes)}, exceeding ambient dimension {self.n}"
            )

    @property
    def m(self):
        return len(self.sizes)

    @property
    def k(self):
        return sum(self.sizes)

    @property
    def remainder(self):
        return self.n - self.k

    def partition_range(self, i):
        """Half-open column range of partition ``i``."""
        start = sum(self.sizes[:i])
        return start, start + self.sizes[i]

    @property
    def perp_range(self):
        return self.k, self.n

    @property
    def partition_offsets(self):
        """Boundaries of the m partitions only."""
        return np.concatenate([[0], np.cumsum(self.sizes)]).astype(np.intp)

    @property
    def block_offsets(self):
        """Boundaries of the m partitions plus the trailing block when non-empty."""
        offsets = self.partition_offsets
        if self.remainder > 0:
            offsets = np.append(offsets, self.n).astype(np.intp)
        return offsets

    def block_sizes(self):
        """Sizes of every block that ``block_rotate`` acts on, trailing block last."""
        return list(self.sizes) + [self.remainder]


def _readonly(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PSPoint:
    """One orthogonal representative of a point on the manifold.

    Matrices whose orthonormality defect lies in (1e-10, 1e-6] are repaired
    with a QR re-orthonormalization; larger defects are rejected.
    """

    spec: PartitionSpec
    q: np.ndarray

    def __post_init__(self):
        q = as_mat(self.q, "q")
        n = self.spec.n
        if q.shape != (n, n):
            raise ShapeMismatch(f"q must be {n}x{n}, got {q.shape}")
        defect = orthonormality_defect(q)
        if defect > REPAIR_TOL:
            raise NotOrthonormal(f"orthonormality defect {defect:.3e} exceeds {REPAIR_TOL:g}")
        if defect > TOL:
            q, _ = qr_positive(q)
        object.__setattr__(self, "q", _readonly(q))

    @property
    def n(self):
        return self.spec.n


@dataclass(frozen=True, eq=False)
class TangentVector:
    """An n x n tangent direction ``delta`` at the point ``at``."""

    at: PSPoint
    delta: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        delta = as_mat(self.delta, "delta")
        n = self.at.n
        if delta.shape != (n, n):
            raise ShapeMismatch(f"delta must be {n}x{n}, got {delta.shape}")
        if self.check:
            defect = tangent_defect(self.at, delta)
            if defect > TOL * max(1.0, float(np.linalg.norm(delta))):
                raise ShapeMismatch(f"delta is not tangent at the point (defect {defect:.3e})")
        object.__setattr__(self, "delta", _readonly(delta))

    def norm(self):
        return float(np.linalg.norm(self.delta))


def tangent_defect(p, delta):
    """Size of the violation of the tangent-space structure.

    Combines the symmetric part of ``q.T @ delta`` with its diagonal blocks.
    """
    a = p.q.T @ delta
    worst = float(np.max(np.abs(a + a.T))) if a.size else 0.0
    offsets = p.spec.block_offsets
    for start, stop in zip(offsets[:-1], offsets[1:]):
        worst = max(worst, float(np.max(np.abs(a[start:stop, start:stop]))))
    return worst


def _square(z, n):
    z = as_mat(z, "z")
    if z.shape != (n, n):
        raise ShapeMismatch(f"expected a {n}x{n} matrix, got {z.shape}")
    return z


def project_tangent(p, z):
    """Orthogonal projection of an ambient n x n direction onto the tangent space at ``p``."""
    z = _square(z, p.n)
    delta = kernels.project_tangent(p.q, z, p.spec.block_offsets)
    return TangentVector(p, delta, check=False)


def lift_euclidean_gradient(p, g):
    """Project a gradient taken w.r.t. the n x k representative.

    The trailing n - k columns of the ambient gradient are taken as zero.
    """
    g = as_mat(g, "gradient")
    spec = p.spec
    if g.shape != (spec.n, spec.k):
        raise ShapeMismatch(f"gradient must be {spec.n}x{spec.k}, got {g.shape}")
    z = np.zeros((spec.n, spec.n))
    z[:, : spec.k] = g
    return project_tangent(p, z)


def _check_tangent(p, d):
    if d.at is not p and not (d.at.spec == p.spec and np.array_equal(d.at.q, p.q)):
        raise SpecMismatch("tangent vector is attached to a different point")


def retract_qr(p, d, alpha):
    """Q-factor retraction: the point ``qr(q - alpha * delta)``."""
    _check_tangent(p, d)
    if alpha < 0:
        raise ConfigError(f"step size must be >= 0, got {alpha}")
    q, _ = qr_positive(p.q - alpha * d.delta)
    return PSPoint(p.spec, q)


def exp_map(p, d, alpha):
    """Geodesic step ``q @ expm(-alpha * q.T @ delta)``.

    Moves in the same direction as :func:`retract_qr` (against ``delta``), so
    the two agree to first order in ``alpha``. Intended as a reference for
    small ``n``, not for production use.
    """
    _check_tangent(p, d)
    if alpha < 0:
        raise ConfigError(f"step size must be >= 0, got {alpha}")
    a = p.q.T @ d.delta
    a = 0.5 * (a - a.T)
    return PSPoint(p.spec, p.q @ scipy.linalg.expm(-alpha * a))


def block_rotate(p, rotations=None, seed=None):
    """Right-multiply by a block-diagonal orthogonal matrix.

    The result represents the same manifold point. ``rotations`` holds one
    orthogonal matrix per partition followed by one for the trailing block
    (omit it, or pass a 0x0 array, when k == n). With ``rotations=None``
    random rotations are drawn from ``seed``.
    """
    spec = p.spec
    sizes = spec.block_sizes()
    if rotations is None:
        rng = np.random.default_rng(seed)
        rotations = [
            random_orthogonal(s, int(rng.integers(2**63 - 1))) if s > 0 else np.zeros((0, 0))
            for s in sizes
        ]
    rotations = list(rotations)
    if len(rotations) == len(sizes) - 1 and sizes[-1] == 0:
        rotations.append(np.zeros((0, 0)))
    if len(rotations) != len(sizes):
        raise ShapeMismatch(f"expected {len(sizes)} rotation blocks, got {len(rotations)}")
    e = np.zeros((spec.n, spec.n))
    start = 0
    for size, rot in zip(sizes, rotations):
        rot = np.asarray(rot, dtype=np.float64)
        if rot.shape != (size, size):
            raise ShapeMismatch(f"rotation block must be {size}x{size}, got {rot.shape}")
        if size and orthonormality_defect(rot) > TOL:
            raise NotOrthonormal("rotation block is not orthogonal")
        e[start : start + size, start : start + size] = rot
        start += size
    return PSPoint(spec, p.q @ e)


def subspace_distance(p, r):
    """Largest per-partition Frobenius distance between span projectors.

    Zero exactly when ``p`` and ``r`` are the same manifold point.
    """
    if p.spec != r.spec:
        raise SpecMismatch(f"points live on different manifolds: {p.spec} vs {r.spec}")
    return kernels.subspace_distance(p.q, r.q, p.spec.partition_offsets)


def representative(p):
    """The n x k matrix of the first k columns."""
    return p.q[:, : p.spec.k].copy()


def partition_cols(p, i):
    """Columns spanning partition ``i``."""
    start, stop = p.spec.partition_range(i)
    return p.q[:, start:stop].copy()


def perp_cols(p):
    start, stop = p.spec.perp_range
    return p.q[:, start:stop].copy()


def random_point(spec, seed):
    return PSPoint(spec, random_orthogonal(spec.n, seed))
