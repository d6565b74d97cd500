"""Principal component and canonical correlation analysis of latent matrices."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_matrix

__all__ = ["PcaResult", "CcaResult", "PCA", "CCA", "pca_evr", "cca", "evr_curve_distance",
           "numerical_rank", "frames_matrix", "SingularWhiteningError"]


class SingularWhiteningError(np.linalg.LinAlgError):
    """A covariance block cannot be whitened without regularization."""


@dataclass
class PcaResult:
    ratios: np.ndarray
    components: np.ndarray


@dataclass
class CcaResult:
    correlations: np.ndarray
    x_weights: np.ndarray
    y_weights: np.ndarray
    effective_rank: int


def frames_matrix(field):
    """Flatten a ``(nt, nlat, nlon)`` field to a ``nt x (nlat*nlon)`` sample matrix."""
    field = np.asarray(field, dtype=np.float64)
    return field.reshape(field.shape[0], -1)


def numerical_rank(s, shape):
    """Rank implied by singular values ``s`` of a matrix of ``shape``, numpy's default tolerance."""
    if s.size == 0 or s[0] == 0.0:
        return 0
    tol = s[0] * max(shape) * np.finfo(np.float64).eps
    return int(np.sum(s > tol))


class PCA(TransformerMixin, BaseEstimator):
    """PCA via the SVD of the column-centered data.

    ``explained_variance_ratio_`` always has one entry per input column; entries
    past ``min(n_samples - 1, n_features)`` are zero.
    """

    def __init__(self, n_components=None):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_matrix(X, min_rows=2)
        self.mean_ = X.mean(axis=0)
        _, s, vt = np.linalg.svd(X - self.mean_, full_matrices=False)
        var = s ** 2
        total = var.sum()
        if total == 0.0:
            raise ValueError("all columns are constant: total variance is zero")
        ratios = np.zeros(X.shape[1])
        keep = min(X.shape[0] - 1, X.shape[1])
        ratios[:keep] = var[:keep] / total
        self.explained_variance_ratio_ = ratios
        self.explained_variance_ = var[:keep] / (X.shape[0] - 1)
        n = keep if self.n_components is None else min(self.n_components, keep)
        self.components_ = vt[:n]
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_matrix(X)
        return (X - self.mean_) @ self.components_.T


def pca_evr(m):
    pca = PCA().fit(m)
    return PcaResult(pca.explained_variance_ratio_, pca.components_.T)


class CCA(BaseEstimator):
    """Canonical correlation analysis by SVD of the whitened cross-covariance.

    With ``ridge > 0`` each covariance block is regularized as
    ``Sigma + ridge * I`` before whitening, which keeps the problem defined when
    a set has more columns than samples.
    """

    def __init__(self, ridge=1e-8):
        self.ridge = ridge

    def fit(self, X, Y):
        X = check_matrix(X, min_rows=3)
        Y = check_matrix(Y, min_rows=3)
        if X.shape[0] != Y.shape[0]:
            raise ValueError(f"row mismatch: {X.shape[0]} vs {Y.shape[0]}")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        n = X.shape[0]
        self.x_mean_, self.y_mean_ = X.mean(axis=0), Y.mean(axis=0)
        ux, sx, vxt = np.linalg.svd(X - self.x_mean_, full_matrices=False)
        uy, sy, vyt = np.linalg.svd(Y - self.y_mean_, full_matrices=False)
        rx = numerical_rank(sx, X.shape)
        ry = numerical_rank(sy, Y.shape)
        if self.ridge == 0:
            if rx < X.shape[1] or ry < Y.shape[1]:
                raise SingularWhiteningError(
                    f"rank-deficient set (ranks {rx}/{X.shape[1]}, {ry}/{Y.shape[1]}); use ridge > 0")
        # Sigma = V diag(s^2/(n-1)) V^T, so whitening acts diagonally in the V basis and
        # Sigma_xy only touches span(V_x) x span(V_y).
        ex = sx ** 2 / (n - 1) + self.ridge
        ey = sy ** 2 / (n - 1) + self.ridge
        dx = np.divide(sx / np.sqrt(n - 1), np.sqrt(ex), out=np.zeros_like(sx), where=ex > 0)
        dy = np.divide(sy / np.sqrt(n - 1), np.sqrt(ey), out=np.zeros_like(sy), where=ey > 0)
        core = (dx[:, None] * (ux.T @ uy)) * dy[None, :]
        p, rho, qt = np.linalg.svd(core, full_matrices=False)
        r = min(rx, ry)
        self.effective_rank_ = r
        self.correlations_ = np.clip(rho[:r], 0.0, None)
        inv_x = np.divide(1.0, np.sqrt(ex), out=np.zeros_like(ex), where=ex > 0)
        inv_y = np.divide(1.0, np.sqrt(ey), out=np.zeros_like(ey), where=ey > 0)
        self.x_weights_ = vxt.T @ (inv_x[:, None] * p[:, :r])
        self.y_weights_ = vyt.T @ (inv_y[:, None] * qt.T[:, :r])
        return self

    def transform(self, X, Y=None):
        """Canonical variates ``u`` (and ``v`` when ``Y`` is given)."""
        check_is_fitted(self, "x_weights_")
        u = (check_matrix(X) - self.x_mean_) @ self.x_weights_
        if Y is None:
            return u
        return u, (check_matrix(Y) - self.y_mean_) @ self.y_weights_


def cca(X, Y, ridge=1e-8):
    model = CCA(ridge=ridge).fit(X, Y)
    return CcaResult(model.correlations_, model.x_weights_, model.y_weights_,
                     model.effective_rank_)


def evr_curve_distance(a, b):
    """L1 distance between two ratio curves after zero-padding the shorter one."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("ratio curves must be nonempty")
    n = max(a.size, b.size)
    return float(np.abs(np.pad(a, (0, n - a.size)) - np.pad(b, (0, n - b.size))).sum())
