"""Latent-space reconstruction and explainability toolkit for sparse field data."""

__version__ = "0.1.0"

from .corr import CCA, PCA, cca, evr_curve_distance, pca_evr  # noqa: E402
from .embed import TSNE, KMeans, kmeans, spread_sweep, tsne  # noqa: E402
from .fieldgen import FieldConfig, ObservationSet, generate_field, sample_observations  # noqa: E402
from .mmgn import MMGN, TrainConfig  # noqa: E402
from .tucker import TuckerDecomposition, core_entropy, entropy_sweep, tucker_hooi  # noqa: E402

__all__ = [
    "CCA", "PCA", "TSNE", "KMeans", "MMGN", "TrainConfig", "TuckerDecomposition",
    "FieldConfig", "ObservationSet", "generate_field", "sample_observations",
    "cca", "evr_curve_distance", "pca_evr", "kmeans", "spread_sweep", "tsne",
    "core_entropy", "entropy_sweep", "tucker_hooi",
]
