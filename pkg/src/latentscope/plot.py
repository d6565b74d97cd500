"""SVG renderings of report files.

Plots only read values from reports; nothing is recomputed. Output is
byte-stable: matplotlib's SVG id salt and date metadata are pinned.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import reports  # noqa: E402
from .fieldgen import read_attribution  # noqa: E402

__all__ = ["plot_report", "plot_embedding", "plot_spread", "plot_pca", "plot_entropy",
           "plot_factors", "plot_ablation", "plot_attribution", "plot_errors"]

_RC = {"svg.hashsalt": "latentscope", "svg.fonttype": "none", "font.size": 9}


def _save(fig, out):
    tmp = out + ".part"
    try:
        fig.savefig(tmp, format="svg", metadata={"Date": None, "Creator": "latentscope"})
        os.replace(tmp, out)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.remove(tmp)
    return out


def plot_embedding(path, out):
    t, pts, _ = reports.read_embedding(path)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 4))
        sc = ax.scatter(pts[:, 0], pts[:, 1], c=t, cmap="viridis", s=14)
        fig.colorbar(sc, ax=ax, label="time step")
        ax.set_xlabel("t-SNE 1")
        ax.set_ylabel("t-SNE 2")
        return _save(fig, out)


def plot_spread(path, out):
    records = reports.read_json(path)
    if not isinstance(records, list) or not records:
        raise reports.ReportError(f"{path}: expected a nonempty list of spread records")
    try:
        data = [r["sigmas"] for r in records]
        names = [str(r["latent_dim"]) for r in records]
    except (KeyError, TypeError):
        raise reports.ReportError(f"{path}: records need latent_dim and sigmas") from None
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.boxplot(data)
        ax.set_xticks(range(1, len(names) + 1), names)
        ax.set_xlabel("latent space")
        ax.set_ylabel("cluster spread (RMS distance)")
        return _save(fig, out)


def plot_pca(path, out, top=None):
    records = reports.read_json(path)
    if isinstance(records, dict):
        records = [records]
    if not records:
        raise reports.ReportError(f"{path}: no PCA records")
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for rec in records:
            ratios = np.asarray(rec.get("ratios", []), dtype=float)
            if ratios.size == 0:
                plt.close(fig)
                raise reports.ReportError(f"{path}: empty ratio list for {rec.get('latent_dim')}")
            ratios = ratios[ratios > 0]
            if top:
                ratios = ratios[:top]
            ax.plot(np.arange(1, ratios.size + 1), ratios, marker=".", label=str(rec["latent_dim"]))
        ax.set_yscale("log")
        ax.set_xlabel("principal component")
        ax.set_ylabel("explained variance ratio")
        ax.legend(fontsize=7)
        return _save(fig, out)


def plot_entropy(path, out):
    arr = reports.read_entropy_sweep(path)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot(arr[:, 0], arr[:, 1], marker="o", label="truth")
        ax.plot(arr[:, 0], arr[:, 2], marker="s", label="model")
        ax.set_xlabel("multirank r")
        ax.set_ylabel("core entropy (nats)")
        ax.legend()
        return _save(fig, out)


def plot_factors(paths, out):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 4))
        for p in paths:
            vals = reports.read_factor_comparison(p)
            ax.plot(np.arange(vals.size), vals, marker=".",
                    label=os.path.splitext(os.path.basename(p))[0])
        ax.set_xlabel("component")
        ax.set_ylabel("|Pearson|")
        ax.set_ylim(0, 1.05)
        ax.legend(fontsize=7)
        return _save(fig, out)


def plot_ablation(path, out):
    rec = reports.read_json(path)
    try:
        mse = [d["total_mse"] for d in rec["per_dim"]]
        base = rec["baseline_mse"]
    except (KeyError, TypeError):
        raise reports.ReportError(f"{path}: not an ablation report") from None
    if not mse:
        raise reports.ReportError(f"{path}: no ablated dimensions")
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.bar(np.arange(len(mse)), mse)
        ax.axhline(base, color="k", linestyle="--", label="baseline")
        ax.set_xlabel("ablated dimension")
        ax.set_ylabel("MSE")
        ax.legend()
        return _save(fig, out)


def plot_attribution(path, out):
    grid = read_attribution(path)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        im = ax.imshow(grid, origin="lower", cmap="tab20", interpolation="nearest", aspect="auto")
        fig.colorbar(im, ax=ax, label="most damaging latent dimension")
        ax.set_xlabel("lon index")
        ax.set_ylabel("lat index")
        return _save(fig, out)


def plot_errors(path, out):
    records = reports.read_json(path)
    try:
        k = [r["latent_dim"] for r in records]
        err = [r["rel_error"] for r in records]
    except (KeyError, TypeError):
        raise reports.ReportError(f"{path}: not a sweep summary") from None
    if not k:
        raise reports.ReportError(f"{path}: empty sweep summary")
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot(k, err, marker="o")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("latent size k")
        ax.set_ylabel("relative L2 error")
        return _save(fig, out)


def _kind(path):
    name = os.path.basename(path)
    if name.endswith(".fld"):
        return "attribution"
    if name.endswith(".csv"):
        with open(path) as fh:
            head = fh.readline().strip()
        return {",".join(reports.EMBED_HEADER): "embedding",
                ",".join(reports.SWEEP_HEADER): "entropy",
                ",".join(reports.FACTOR_HEADER): "factors"}.get(head)
    if name.endswith(".json"):
        data = reports.read_json(path)
        first = data[0] if isinstance(data, list) and data else data
        if isinstance(first, dict):
            if "sigmas" in first:
                return "spread"
            if "ratios" in first:
                return "pca"
            if "per_dim" in first:
                return "ablation"
            if "rel_error" in first:
                return "errors"
        if isinstance(data, list) and not data:
            raise reports.ReportError(f"{path}: empty report")
    return None


_PLOTTERS = {"embedding": plot_embedding, "spread": plot_spread, "pca": plot_pca,
             "entropy": plot_entropy, "ablation": plot_ablation,
             "attribution": plot_attribution, "errors": plot_errors}


def plot_report(path, out):
    """Render any supported report file to ``out`` (SVG); the type is sniffed from content."""
    kind = _kind(path)
    if kind == "factors":
        return plot_factors([path], out)
    if kind not in _PLOTTERS:
        raise reports.ReportError(f"{path}: unrecognized report type")
    return _PLOTTERS[kind](path, out)
