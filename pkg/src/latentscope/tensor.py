"""Dense rank-3 tensor and matrix primitives.

Tensors are ``(nt, nlat, nlon)`` float64 arrays in C order, so time is the
slowest axis. Unfoldings use the same ordering: the mode-``m`` unfolding has
one row per index of mode ``m`` and the remaining two modes flattened in their
natural (row-major) order.
"""

import numpy as np

from ._validation import (
    DegenerateCorrelationError,
    check_matrix,
    check_mode,
    check_tensor3,
    check_vector,
)

__all__ = ["unfold", "fold", "mode_product", "multi_mode_product", "svd", "pearson"]


def unfold(t, mode):
    """Mode-``mode`` matricization of a rank-3 tensor."""
    t = check_tensor3(t)
    mode = check_mode(mode)
    return np.ascontiguousarray(np.moveaxis(t, mode, 0).reshape(t.shape[mode], -1))


def fold(m, mode, dims):
    """Inverse of :func:`unfold`."""
    mode = check_mode(mode)
    dims = tuple(int(d) for d in dims)
    m = np.asarray(m, dtype=np.float64)
    moved = (dims[mode],) + tuple(d for i, d in enumerate(dims) if i != mode)
    if m.shape != (moved[0], moved[1] * moved[2]):
        raise ValueError(f"matrix shape {m.shape} does not unfold dims {dims} along mode {mode}")
    return np.ascontiguousarray(np.moveaxis(m.reshape(moved), 0, mode))


def mode_product(t, m, mode):
    """Multiply tensor ``t`` by matrix ``m`` along ``mode``.

    The result has ``dims[mode]`` replaced by ``m.shape[0]``.
    """
    t = check_tensor3(t)
    mode = check_mode(mode)
    m = check_matrix(m)
    if m.shape[1] != t.shape[mode]:
        raise ValueError(
            f"matrix has {m.shape[1]} columns but tensor mode {mode} has size {t.shape[mode]}"
        )
    out = np.tensordot(m, t, axes=(1, mode))
    return np.ascontiguousarray(np.moveaxis(out, 0, mode))


def multi_mode_product(t, matrices, transpose=False):
    """Apply one matrix per mode; ``transpose`` contracts with ``M.T`` instead."""
    for mode, m in enumerate(matrices):
        if m is None:
            continue
        t = mode_product(t, m.T if transpose else m, mode)
    return t


def svd(m):
    """Thin SVD ``m = U @ diag(s) @ Vt`` with ``s`` sorted descending."""
    m = check_matrix(m)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return u, s, vt


def pearson(x, y):
    """Pearson correlation coefficient of two equal-length vectors."""
    x = check_vector(x, "x", min_len=2)
    y = check_vector(y, "y", min_len=2)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = np.dot(xc, xc)
    syy = np.dot(yc, yc)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateCorrelationError("correlation undefined for a zero-variance vector")
    r = np.dot(xc, yc) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))
