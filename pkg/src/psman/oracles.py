"""Slow, independent reference computations used to check the fast paths.

Nothing here is used by the optimizer itself.
"""
import itertools

import numpy as np


def gram_schmidt_qr(m):
    """QR by classical Gram-Schmidt with one reorthogonalization pass.

    Produces the positive-diagonal factorization directly.
    """
    a = np.array(m, dtype=np.float64)
    n, k = a.shape
    q = np.zeros((n, k))
    r = np.zeros((k, k))
    for j in range(k):
        v = a[:, j].copy()
        for _ in range(2):
            coeffs = q[:, :j].T @ v
            v -= q[:, :j] @ coeffs
            r[:j, j] += coeffs
        r[j, j] = np.linalg.norm(v)
        q[:, j] = v / r[j, j]
    return q, r


def tangent_basis(spec, q):
    """Orthonormal basis of the tangent space at ``q``, as (d, n, n) array.

    Enumerates every free entry of the off-diagonal blocks: for a row index
    ``r`` in block ``b`` and column index ``c`` in an earlier block ``a``,
    the element is ``q @ (E_rc - E_cr) / sqrt(2)``.
    """
    n = spec.n
    offsets = list(spec.block_offsets)
    blocks = [range(lo, hi) for lo, hi in zip(offsets[:-1], offsets[1:])]
    basis = []
    for a, b in itertools.combinations(range(len(blocks)), 2):
        for c in blocks[a]:
            for r in blocks[b]:
                skew = np.zeros((n, n))
                skew[r, c] = 1.0
                skew[c, r] = -1.0
                basis.append(q @ skew / np.sqrt(2.0))
    return np.array(basis).reshape(-1, n, n)


def tangent_dimension(spec):
    sizes = [s for s in spec.block_sizes() if s > 0]
    return sum(a * b for a, b in itertools.combinations(sizes, 2))


def project_tangent_lstsq(spec, q, z):
    """Least-squares projection of ``z`` onto the span of :func:`tangent_basis`
    under the trace inner product."""
    basis = tangent_basis(spec, q)
    n = spec.n
    if basis.shape[0] == 0:
        return np.zeros((n, n))
    mat = basis.reshape(basis.shape[0], -1).T
    coef, *_ = np.linalg.lstsq(mat, np.asarray(z, dtype=np.float64).ravel(), rcond=None)
    return (mat @ coef).reshape(n, n)


def grassmann_direction(q, k, g):
    """Tangent projection on the Grassmannian ``[k]`` written out directly.

    For ambient gradient ``[g | 0]`` at ``q = [y | y_perp]`` this is
    ``0.5 * [(I - y y^T) g | -y g^T y_perp]``.
    """
    y, y_perp = q[:, :k], q[:, k:]
    left = g - y @ (y.T @ g)
    right = -y @ (g.T @ y_perp)
    return 0.5 * np.hstack([left, right])


def _numpy_qr_positive(a):
    q, r = np.linalg.qr(a)
    s = np.where(np.diag(r) < 0, -1.0, 1.0)
    return q * s


def grassmann_descent(grad, q0, k, alpha, iters):
    """Fixed-step Riemannian descent on the Grassmannian; returns all iterates."""
    q = np.array(q0, dtype=np.float64)
    path = [q]
    for _ in range(iters):
        delta = grassmann_direction(q, k, grad(q[:, :k]))
        q = _numpy_qr_positive(q - alpha * delta)
        path.append(q)
    return path


def loglog_slope(xs, ys):
    xs = np.log(np.asarray(xs, dtype=np.float64))
    ys = np.log(np.asarray(ys, dtype=np.float64))
    return float(np.polyfit(xs, ys, 1)[0])
