"""Input validation helpers shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array


class DegenerateCorrelationError(ValueError):
    """Raised when a correlation is undefined because an input has zero variance."""


def check_matrix(m, name="matrix", min_rows=1):
    m = check_array(m, dtype=np.float64, ensure_2d=True, ensure_all_finite=True,
                    ensure_min_samples=min_rows, copy=False)
    return np.ascontiguousarray(m)


def check_tensor3(t, name="tensor"):
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3:
        raise ValueError(f"{name} must be rank 3 (time, lat, lon), got shape {t.shape}")
    if min(t.shape) < 1:
        raise ValueError(f"{name} has an empty mode: {t.shape}")
    if not np.all(np.isfinite(t)):
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(t)


def check_vector(v, name="vector", min_len=1):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if v.size < min_len:
        raise ValueError(f"{name} needs at least {min_len} entries, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    return v


def check_mode(mode):
    if mode not in (0, 1, 2):
        raise ValueError(f"mode must be 0, 1 or 2, got {mode!r}")
    return int(mode)
