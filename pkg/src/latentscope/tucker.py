"""Tucker decomposition by higher-order orthogonal iteration, and its comparisons."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_matrix, check_tensor3
from .tensor import multi_mode_product, pearson, unfold

__all__ = ["TuckerResult", "EntropySweep", "TuckerDecomposition", "tucker_hooi",
           "core_entropy", "entropy_sweep", "compare_factors", "zero_crossings"]


@dataclass
class TuckerResult:
    core: np.ndarray
    factors: list
    rel_error: float
    fit_history: list


@dataclass
class EntropySweep:
    ranks: np.ndarray
    entropy_truth: np.ndarray
    entropy_model: np.ndarray
    rel_error_truth: np.ndarray
    rel_error_model: np.ndarray

    def rows(self):
        return list(zip(self.ranks.tolist(), self.entropy_truth.tolist(),
                        self.entropy_model.tolist(), self.rel_error_truth.tolist(),
                        self.rel_error_model.tolist()))


def _leading_left(m, r):
    u, _, _ = np.linalg.svd(m, full_matrices=False)
    u = u[:, :r]
    # fix the sign so the largest-magnitude entry of each column is positive
    pivot = np.abs(u).argmax(axis=0)
    signs = np.sign(u[pivot, np.arange(r)])
    signs[signs == 0] = 1.0
    return u * signs


class TuckerDecomposition(TransformerMixin, BaseEstimator):
    """Rank-``(r_t, r_lat, r_lon)`` Tucker model of a 3-way tensor.

    Factors start from the truncated HOSVD and are refined by HOOI until the
    captured norm improves by less than ``tol`` relative to ``|X|``.
    """

    def __init__(self, ranks=(2, 2, 2), max_iter=50, tol=1e-8):
        self.ranks = ranks
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        X = check_tensor3(X)
        ranks = tuple(int(r) for r in self.ranks)
        if len(ranks) != 3 or any(not 1 <= r <= d for r, d in zip(ranks, X.shape)):
            raise ValueError(f"ranks {ranks} must satisfy 1 <= r <= dims {X.shape}")
        norm = np.linalg.norm(X)
        factors = [_leading_left(unfold(X, m), r) for m, r in enumerate(ranks)]
        core = multi_mode_product(X, factors, transpose=True)
        history = [float(np.linalg.norm(core))]
        for _ in range(self.max_iter):
            for m in range(3):
                others = [None if i == m else f for i, f in enumerate(factors)]
                y = multi_mode_product(X, others, transpose=True)
                factors[m] = _leading_left(unfold(y, m), ranks[m])
            core = multi_mode_product(X, factors, transpose=True)
            history.append(float(np.linalg.norm(core)))
            if norm == 0 or (history[-1] - history[-2]) / norm < self.tol:
                break
        self.core_ = core
        self.factors_ = factors
        self.fit_history_ = history
        recon = multi_mode_product(core, factors)
        self.rel_error_ = float(np.linalg.norm(X - recon) / norm) if norm > 0 else 0.0
        return self

    def transform(self, X):
        """Project ``X`` onto the fitted factor bases (the core of ``X``)."""
        check_is_fitted(self, "factors_")
        return multi_mode_product(check_tensor3(X), self.factors_, transpose=True)

    def inverse_transform(self, core):
        check_is_fitted(self, "factors_")
        return multi_mode_product(core, self.factors_)


def tucker_hooi(t, ranks, max_iters=50, tol=1e-8):
    est = TuckerDecomposition(ranks, max_iters, tol).fit(t)
    return TuckerResult(est.core_, est.factors_, est.rel_error_, est.fit_history_)


def core_entropy(core, normalization="l1"):
    """Shannon entropy (nats) of the normalized core magnitudes.

    ``normalization="l1"`` uses ``|g| / sum|g|``; ``"energy"`` uses
    ``g^2 / sum g^2``.
    """
    g = np.abs(np.asarray(core, dtype=np.float64)).ravel()
    if normalization == "energy":
        g = g * g
    elif normalization != "l1":
        raise ValueError(f"unknown normalization {normalization!r}")
    total = g.sum()
    if total == 0.0:
        raise ValueError("core is all zeros")
    p = g[g > 0] / total
    return float(-np.sum(p * np.log(p)))


def entropy_sweep(truth, model_out, r_max=16, normalization="l1", max_iters=50, tol=1e-8,
                  executor=None):
    """Core entropy and fit error of cubic ``[r, r, r]`` Tucker models for r = 1..r_max.

    ``executor`` (a ``concurrent.futures`` executor) optionally runs ranks in
    parallel; output order is by ``r`` regardless.
    """
    truth = check_tensor3(truth, "truth")
    model_out = check_tensor3(model_out, "model_out")
    if truth.shape != model_out.shape:
        raise ValueError(f"shape mismatch: {truth.shape} vs {model_out.shape}")
    if not 1 <= r_max <= min(truth.shape):
        raise ValueError(f"r_max {r_max} must lie in [1, {min(truth.shape)}]")

    def one(r):
        a = tucker_hooi(truth, (r, r, r), max_iters, tol)
        b = tucker_hooi(model_out, (r, r, r), max_iters, tol)
        return (core_entropy(a.core, normalization), core_entropy(b.core, normalization),
                a.rel_error, b.rel_error)

    ranks = list(range(1, r_max + 1))
    rows = list(executor.map(one, ranks)) if executor is not None else [one(r) for r in ranks]
    cols = np.array(rows).T
    return EntropySweep(np.array(ranks), cols[0], cols[1], cols[2], cols[3])


def compare_factors(f_truth, f_model):
    """``|pearson|`` between matching columns of two factor matrices."""
    f_truth = check_matrix(f_truth, min_rows=2)
    f_model = check_matrix(f_model, min_rows=2)
    if f_truth.shape != f_model.shape:
        raise ValueError(f"shape mismatch: {f_truth.shape} vs {f_model.shape}")
    return np.array([abs(pearson(f_truth[:, i], f_model[:, i]))
                     for i in range(f_truth.shape[1])])


def zero_crossings(v):
    """Number of sign changes along a vector (exact zeros are skipped)."""
    s = np.sign(np.asarray(v, dtype=np.float64))
    s = s[s != 0]
    return int(np.sum(s[1:] != s[:-1]))
