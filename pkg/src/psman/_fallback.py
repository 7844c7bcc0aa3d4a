"""Pure numpy implementations of the hot kernels.

Same signatures and semantics as the compiled ``_kernels`` module; used when
the extension is not built or ``PSMAN_PURE_PYTHON`` is set.
"""
import numpy as np


def householder_qr(a):
    """Thin QR with non-negative R diagonal. ``a`` is (n, k), n >= k."""
    q, r = np.linalg.qr(a, mode="reduced")
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    return q * signs, r * signs[:, None]


def project_tangent(q, z, offsets):
    n = q.shape[0]
    out = np.empty((n, n))
    for start, stop in zip(offsets[:-1], offsets[1:]):
        qi = q[:, start:stop]
        zi = z[:, start:stop]
        out[:, start:stop] = 0.5 * (
            (zi - q @ (z.T @ qi)) + (qi @ (zi.T @ qi) - qi @ (qi.T @ zi))
        )
    return out


def subspace_distance(q1, q2, offsets):
    worst = 0.0
    for start, stop in zip(offsets[:-1], offsets[1:]):
        a = q1[:, start:stop]
        b = q2[:, start:stop]
        worst = max(worst, float(np.linalg.norm(a @ a.T - b @ b.T)))
    return worst
