# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the optimizer's inner loop.

At the matrix sizes this package targets, a retraction step through numpy is
a few dozen small BLAS/LAPACK calls whose dispatch overhead dominates the
arithmetic. These loops fuse each step into a single call.
"""
import numpy as np
from libc.math cimport sqrt


def householder_qr(const double[:, :] a):
    """Thin QR of an (n, k) matrix, n >= k, with non-negative R diagonal."""
    cdef Py_ssize_t n = a.shape[0], k = a.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double norm, s, dot, unorm2, d

    w_arr = np.array(a, dtype=np.float64, order="C", copy=True)
    u_arr = np.zeros((n, k), dtype=np.float64)
    unorms_arr = np.zeros(k, dtype=np.float64)
    q_arr = np.zeros((n, k), dtype=np.float64)
    r_arr = np.zeros((k, k), dtype=np.float64)
    cdef double[:, ::1] w = w_arr
    cdef double[:, ::1] u = u_arr
    cdef double[::1] unorms = unorms_arr
    cdef double[:, ::1] q = q_arr
    cdef double[:, ::1] r = r_arr

    for j in range(k):
        norm = 0.0
        for i in range(j, n):
            norm += w[i, j] * w[i, j]
        norm = sqrt(norm)
        if norm == 0.0:
            continue
        s = 1.0 if w[j, j] >= 0.0 else -1.0
        unorm2 = 0.0
        for i in range(j, n):
            u[i, j] = w[i, j]
        u[j, j] += s * norm
        for i in range(j, n):
            unorm2 += u[i, j] * u[i, j]
        unorms[j] = unorm2
        w[j, j] = -s * norm
        for i in range(j + 1, n):
            w[i, j] = 0.0
        for c in range(j + 1, k):
            dot = 0.0
            for i in range(j, n):
                dot += u[i, j] * w[i, c]
            dot = 2.0 * dot / unorm2
            for i in range(j, n):
                w[i, c] -= dot * u[i, j]

    for j in range(k):
        q[j, j] = 1.0
    for j in range(k - 1, -1, -1):
        unorm2 = unorms[j]
        if unorm2 == 0.0:
            continue
        for c in range(j, k):
            dot = 0.0
            for i in range(j, n):
                dot += u[i, j] * q[i, c]
            dot = 2.0 * dot / unorm2
            for i in range(j, n):
                q[i, c] -= dot * u[i, j]

    for j in range(k):
        d = -1.0 if w[j, j] < 0.0 else 1.0
        for c in range(j, k):
            r[j, c] = d * w[j, c]
        if d < 0.0:
            for i in range(n):
                q[i, j] = -q[i, j]
    return q_arr, r_arr


def project_tangent(const double[:, :] q, const double[:, :] z, const Py_ssize_t[:] offsets):
    """Blockwise tangent projection; column block b of the output is
    0.5 * [(Z_b - Q Z^T Q_b) + (Q_b Z_b^T Q_b - Q_b Q_b^T Z_b)]."""
    cdef Py_ssize_t n = q.shape[0]
    cdef Py_ssize_t nblocks = offsets.shape[0] - 1
    cdef Py_ssize_t b, lo, hi, kb, i, r, c, d
    cdef double acc

    out_arr = np.empty((n, n), dtype=np.float64)
    t_arr = np.empty((n, n), dtype=np.float64)
    m_arr = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] t = t_arr
    cdef double[:, ::1] m = m_arr

    for b in range(nblocks):
        lo = offsets[b]
        hi = offsets[b + 1]
        kb = hi - lo
        # t[:, c] = Z^T Q_b[:, c]
        for r in range(n):
            for c in range(kb):
                acc = 0.0
                for i in range(n):
                    acc = acc + z[i, r] * q[i, lo + c]
                t[r, c] = acc
        # m = Z_b^T Q_b - Q_b^T Z_b  (kb x kb)
        for d in range(kb):
            for c in range(kb):
                acc = 0.0
                for i in range(n):
                    acc = acc + z[i, lo + d] * q[i, lo + c] - q[i, lo + d] * z[i, lo + c]
                m[d, c] = acc
        for i in range(n):
            for c in range(kb):
                acc = z[i, lo + c]
                for r in range(n):
                    acc = acc - q[i, r] * t[r, c]
                for d in range(kb):
                    acc = acc + q[i, lo + d] * m[d, c]
                out[i, lo + c] = 0.5 * acc
    return out_arr


def subspace_distance(const double[:, :] q1, const double[:, :] q2, const Py_ssize_t[:] offsets):
    """Max over blocks of the Frobenius distance between column-span projectors."""
    cdef Py_ssize_t n = q1.shape[0]
    cdef Py_ssize_t nblocks = offsets.shape[0] - 1
    cdef Py_ssize_t b, lo, hi, i, j, c
    cdef double diff, total, worst = 0.0

    for b in range(nblocks):
        lo = offsets[b]
        hi = offsets[b + 1]
        total = 0.0
        for i in range(n):
            for j in range(n):
                diff = 0.0
                for c in range(lo, hi):
                    diff = diff + q1[i, c] * q1[j, c] - q2[i, c] * q2[j, c]
                total = total + diff * diff
        total = sqrt(total)
        if total > worst:
            worst = total
    return worst
