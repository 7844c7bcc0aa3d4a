"""Backend selection for the hot kernels.

The compiled extension is used when it imports cleanly; otherwise the numpy
fallback takes over. Setting ``PSMAN_PURE_PYTHON=1`` forces the fallback.
"""
import contextlib
import os

import numpy as np

from psman import _fallback

if os.environ.get("PSMAN_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from psman import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _fallback


def available_backends():
    return ["cython", "python"] if _compiled is not None else ["python"]


def get_backend(name=None):
    """Return the kernel module for ``name`` ("cython" or "python")."""
    if name is None:
        return _impl
    if name == "python":
        return _fallback
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


@contextlib.contextmanager
def use_backend(name):
    """Temporarily route the module-level kernels through backend ``name``."""
    global _impl
    previous, _impl = _impl, get_backend(name)
    try:
        yield _impl
    finally:
        _impl = previous


def active_backend():
    return "cython" if _impl is _compiled and _compiled is not None else "python"


def _offsets(offsets):
    return np.ascontiguousarray(offsets, dtype=np.intp)


def householder_qr(a):
    return _impl.householder_qr(np.asarray(a, dtype=np.float64))


def project_tangent(q, z, offsets):
    return _impl.project_tangent(q, z, _offsets(offsets))


def subspace_distance(q1, q2, offsets):
    return float(_impl.subspace_distance(q1, q2, _offsets(offsets)))
