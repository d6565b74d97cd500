"""Exact t-SNE, k-means++ clustering and per-cluster spread statistics."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_matrix

__all__ = ["Embedding2D", "ClusterStats", "TSNE", "KMeans", "joint_probabilities",
           "conditional_probabilities", "tsne", "kmeans", "cluster_stats", "spread_sweep",
           "adjacent_pair_ratio"]


@dataclass
class Embedding2D:
    points: np.ndarray
    source_dim: int
    perplexity: float
    seed: int
    kl_divergence: float


@dataclass
class ClusterStats:
    sizes: np.ndarray
    centroids: np.ndarray
    sigmas: np.ndarray
    labels: np.ndarray
    inertia: float


def _row_entropy(d, beta):
    # d is shifted so its minimum is 0; keeps exp() from underflowing entirely
    p = np.exp(-beta * d)
    s = p.sum()
    p /= s
    h = beta * np.dot(d, p) + np.log(s)
    return h, p


def conditional_probabilities(X, perplexity, tol=1e-5, max_iter=200):
    """Row-stochastic ``P(j | i)`` with each row's perplexity calibrated by bisection.

    Returns ``(P, achieved_perplexity)``.
    """
    X = check_matrix(X, min_rows=2)
    n = X.shape[0]
    if not 1.0 <= perplexity <= n - 1:
        raise ValueError(f"perplexity {perplexity} outside [1, {n - 1}]")
    dist = squareform(pdist(X, "sqeuclidean"))
    target = np.log(perplexity)
    P = np.zeros((n, n))
    achieved = np.empty(n)
    for i in range(n):
        d = np.delete(dist[i], i)
        d = d - d.min()
        lo, hi = -np.inf, np.inf
        log_beta = -np.log(max(np.median(d), 1e-300))
        for _ in range(max_iter):
            h, p = _row_entropy(d, np.exp(log_beta))
            if abs(np.exp(h) - perplexity) < tol:
                break
            # entropy falls as beta grows
            if h > target:
                lo = log_beta
                log_beta = log_beta + 1.0 if hi == np.inf else 0.5 * (lo + hi)
            else:
                hi = log_beta
                log_beta = log_beta - 1.0 if lo == -np.inf else 0.5 * (lo + hi)
        achieved[i] = np.exp(h)
        P[i, np.arange(n) != i] = p
    return P, achieved


def joint_probabilities(X, perplexity):
    """Symmetrized joint affinities ``(P + P^T) / 2n``; sums to one."""
    P, _ = conditional_probabilities(X, perplexity)
    P = P + P.T
    return P / P.sum()


class TSNE(TransformerMixin, BaseEstimator):
    """Exact O(n^2) t-SNE to two dimensions.

    Gradient descent with momentum (0.5 while exaggerating, 0.8 after) and
    per-coordinate gains; deterministic for a given ``random_state``.
    """

    def __init__(self, perplexity=10.0, n_iter=1000, early_exaggeration=4.0,
                 exaggeration_iters=100, learning_rate="auto", random_state=0):
        self.perplexity = perplexity
        self.n_iter = n_iter
        self.early_exaggeration = early_exaggeration
        self.exaggeration_iters = exaggeration_iters
        self.learning_rate = learning_rate
        self.random_state = random_state

    def fit(self, X, y=None):
        self.fit_transform(X)
        return self

    def fit_transform(self, X, y=None):
        X = check_matrix(X, min_rows=4)
        n = X.shape[0]
        if not self.perplexity < (n - 1) / 3:
            raise ValueError(
                f"perplexity {self.perplexity} infeasible for {n} rows; need < {(n - 1) / 3:.3g}")
        P = joint_probabilities(X, self.perplexity)
        self.P_ = P
        lr = (max(n / self.early_exaggeration / 4.0, 50.0)
              if self.learning_rate == "auto" else float(self.learning_rate))
        rng = np.random.default_rng(self.random_state)
        Y = rng.normal(0.0, 1e-4, size=(n, 2))
        update = np.zeros_like(Y)
        gains = np.ones_like(Y)
        for it in range(self.n_iter):
            exaggerate = it < self.exaggeration_iters
            momentum = 0.5 if exaggerate else 0.8
            Pe = P * self.early_exaggeration if exaggerate else P
            num = 1.0 / (1.0 + squareform(pdist(Y, "sqeuclidean")))
            np.fill_diagonal(num, 0.0)
            Q = np.maximum(num / num.sum(), 1e-300)
            W = (Pe - Q) * num
            grad = 4.0 * (np.diag(W.sum(axis=1)) - W) @ Y
            same = np.sign(grad) == np.sign(update)
            gains = np.where(same, gains * 0.8, gains + 0.2)
            np.maximum(gains, 0.01, out=gains)
            update = momentum * update - lr * gains * grad
            Y = Y + update
        num = 1.0 / (1.0 + squareform(pdist(Y, "sqeuclidean")))
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / num.sum(), 1e-300)
        mask = P > 0
        self.kl_divergence_ = float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))
        self.embedding_ = Y
        self.n_features_in_ = X.shape[1]
        return Y


def tsne(m, perplexity=10.0, seed=0, iters=1000):
    est = TSNE(perplexity=perplexity, n_iter=iters, random_state=seed)
    pts = est.fit_transform(m)
    return Embedding2D(pts, int(np.asarray(m).shape[1]), float(perplexity), seed,
                       est.kl_divergence_)


def _kmeans_pp(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total == 0.0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[c] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[c]) ** 2, axis=1))
    return centers


def _lloyd(X, centers, max_iter):
    history = []
    labels = None
    for _ in range(max_iter):
        d2 = cdist(X, centers, "sqeuclidean")
        new = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(X.shape[0]), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(centers.shape[0]):
            members = X[labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)
            else:
                # refill an empty cluster with the point farthest from its center
                far = int(np.argmax(d2[np.arange(X.shape[0]), labels]))
                centers[c] = X[far]
    d2 = cdist(X, centers, "sqeuclidean")
    labels = np.argmin(d2, axis=1)
    return labels, centers, float(d2[np.arange(X.shape[0]), labels].sum()), history


class KMeans(ClusterMixin, BaseEstimator):
    """Lloyd's algorithm from k-means++ seeds, best of ``n_init`` restarts by inertia."""

    def __init__(self, n_clusters=6, n_init=8, max_iter=300, random_state=0):
        self.n_clusters = n_clusters
        self.n_init = n_init
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_matrix(X)
        k = self.n_clusters
        if k <= 0 or k > X.shape[0]:
            raise ValueError(f"n_clusters must lie in [1, {X.shape[0]}], got {k}")
        rng = np.random.default_rng(self.random_state)
        best = None
        for _ in range(max(1, self.n_init)):
            run = _lloyd(X, _kmeans_pp(X, k, rng), self.max_iter)
            if best is None or run[2] < best[2]:
                best = run
        self.labels_, self.cluster_centers_, self.inertia_, self.inertia_history_ = best
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        return np.argmin(cdist(check_matrix(X), self.cluster_centers_, "sqeuclidean"), axis=1)


def cluster_stats(points, labels, n_clusters):
    """Sizes, centroids and RMS member-to-centroid distance per cluster."""
    points = np.asarray(points, dtype=np.float64)
    sizes = np.bincount(labels, minlength=n_clusters)
    centroids = np.zeros((n_clusters, points.shape[1]))
    sigmas = np.zeros(n_clusters)
    for c in range(n_clusters):
        members = points[labels == c]
        if len(members):
            centroids[c] = members.mean(axis=0)
            sigmas[c] = np.sqrt(np.mean(np.sum((members - centroids[c]) ** 2, axis=1)))
    inertia = float(np.sum(sizes * sigmas ** 2))
    return ClusterStats(sizes, centroids, sigmas, np.asarray(labels), inertia)


def kmeans(points, k, seed=0, restarts=8):
    est = KMeans(n_clusters=k, n_init=restarts, random_state=seed).fit(points)
    return cluster_stats(points, est.labels_, k)


def adjacent_pair_ratio(points):
    """Mean distance between time-adjacent rows divided by the mean over all pairs."""
    points = np.asarray(points, dtype=np.float64)
    adjacent = np.linalg.norm(np.diff(points, axis=0), axis=1).mean()
    return float(adjacent / pdist(points).mean())


def spread_sweep(latents, original, n_clusters=6, perplexity=10.0, seed=0, iters=1000,
                 embed=True):
    """Embed and cluster every latent space plus the original data.

    ``latents`` maps latent size to a ``T x k`` matrix. Returns one record per
    space in ascending latent size followed by the original data, along with
    the embeddings in the same order.
    """
    if len(latents) < 2:
        raise ValueError("need at least two latent spaces")
    spaces = [(int(k), latents[k]) for k in sorted(latents)] + [("original", original)]
    records, embeddings = [], []
    for name, m in spaces:
        m = check_matrix(m, min_rows=4)
        pts = tsne(m, perplexity, seed, iters).points if embed else m
        stats = kmeans(pts, n_clusters, seed)
        records.append({"latent_dim": name, "sigmas": [float(s) for s in stats.sigmas],
                        "inertia": stats.inertia})
        embeddings.append((name, pts, stats.labels))
    return records, embeddings
