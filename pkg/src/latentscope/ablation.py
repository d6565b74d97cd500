"""Per-dimension latent ablation and its temporal/spatial error decomposition."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_tensor3

__all__ = ["AblationResult", "ablate_latents", "squared_error", "ablate_dimension",
           "error_decompose", "run_ablation", "attribution_map", "same_label_fraction",
           "permutation_baseline"]


@dataclass
class AblationResult:
    """Baseline squared-error tensor plus per-dimension summaries.

    ``total_mse[d]``, ``e_t[d]`` (length nt) and ``e_x[d]`` (nlat x nlon) refer
    to the reconstruction with latent dimension ``d`` ablated.
    """

    baseline: np.ndarray
    total_mse: np.ndarray
    e_t: np.ndarray
    e_x: np.ndarray

    @property
    def baseline_mse(self):
        return float(self.baseline.mean())


def ablate_latents(latents, dim, fill="zero"):
    latents = np.asarray(latents, dtype=np.float64)
    if not 0 <= dim < latents.shape[1]:
        raise ValueError(f"dim {dim} out of range for k={latents.shape[1]}")
    out = latents.copy()
    if fill == "zero":
        out[:, dim] = 0.0
    elif fill == "mean":
        out[:, dim] = latents[:, dim].mean()
    else:
        raise ValueError(f"unknown fill {fill!r}")
    return out


def squared_error(model, latents, truth):
    truth = check_tensor3(truth, "truth")
    return (model.reconstruct(truth.shape, latents) - truth) ** 2


def ablate_dimension(model, latents, dim, truth, fill="zero"):
    """Squared error per grid point after replacing latent column ``dim``."""
    return squared_error(model, ablate_latents(latents, dim, fill), truth)


def _check_weights(weights, shape):
    if weights is None:
        return None
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != shape:
        raise ValueError(f"weights must have shape {shape}, got {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be finite, nonnegative and not all zero")
    return w


def error_decompose(err, weights=None):
    """Mean over space per time step, and mean over time per grid point.

    ``weights`` (nlat x nlon, e.g. cos-latitude) turns the spatial mean into a
    weighted mean; the default is uniform.
    """
    err = check_tensor3(err, "error")
    w = _check_weights(weights, err.shape[1:])
    if w is None:
        return err.mean(axis=(1, 2)), err.mean(axis=0)
    return np.tensordot(err, w, axes=2) / w.sum(), err.mean(axis=0)


def run_ablation(model, latents, truth, fill="zero", executor=None, weights=None):
    truth = check_tensor3(truth, "truth")
    latents = np.asarray(latents, dtype=np.float64)
    _check_weights(weights, truth.shape[1:])
    baseline = squared_error(model, latents, truth)
    dims = range(latents.shape[1])

    def one(d):
        err = ablate_dimension(model, latents, d, truth, fill)
        e_t, e_x = error_decompose(err, weights)
        return float(e_t.mean()), e_t, e_x

    parts = list(executor.map(one, dims)) if executor is not None else [one(d) for d in dims]
    return AblationResult(baseline, np.array([p[0] for p in parts]),
                          np.stack([p[1] for p in parts]), np.stack([p[2] for p in parts]))


def attribution_map(result):
    """Per grid point, the dimension whose ablation gives the largest time-mean error.

    Ties go to the lowest index.
    """
    return np.argmax(result.e_x, axis=0)


def same_label_fraction(labels):
    """Fraction of 4-neighbour grid pairs that carry the same label."""
    labels = np.asarray(labels)
    same = np.count_nonzero(labels[1:, :] == labels[:-1, :])
    same += np.count_nonzero(labels[:, 1:] == labels[:, :-1])
    pairs = (labels.shape[0] - 1) * labels.shape[1] + labels.shape[0] * (labels.shape[1] - 1)
    return same / pairs


def permutation_baseline(labels, n_perm=100, seed=0):
    """Mean :func:`same_label_fraction` over random spatial shuffles of ``labels``."""
    rng = np.random.default_rng(seed)
    flat = np.asarray(labels).ravel()
    vals = [same_label_fraction(rng.permutation(flat).reshape(np.shape(labels)))
            for _ in range(n_perm)]
    return float(np.mean(vals))
