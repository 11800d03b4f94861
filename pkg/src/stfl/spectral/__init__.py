"""Frame-level spectral detector: DFT features, logistic regression, k-means."""

from stfl.spectral.detector import DftDetector, FrameFeatureSet, dft_cluster, dft_evaluate, dft_train, extract_features
from stfl.spectral.features import (
    SpectrumFeature,
    amplitude_spectrum,
    azimuthal_average,
    luminance,
    resample_profile,
    spectrum_feature,
)
from stfl.spectral.kmeans import KMeansResult, kmeans, map_clusters_to_labels
from stfl.spectral.logreg import LogRegModel, logreg_predict, logreg_predict_batch, logreg_train
from stfl.spectral.stats import SpectrumStats, feature_stats, spectrum_stats

__all__ = [
    "DftDetector",
    "FrameFeatureSet",
    "dft_cluster",
    "dft_evaluate",
    "dft_train",
    "extract_features",
    "SpectrumFeature",
    "amplitude_spectrum",
    "azimuthal_average",
    "luminance",
    "resample_profile",
    "spectrum_feature",
    "KMeansResult",
    "kmeans",
    "map_clusters_to_labels",
    "LogRegModel",
    "logreg_predict",
    "logreg_predict_batch",
    "logreg_train",
    "SpectrumStats",
    "feature_stats",
    "spectrum_stats",
]
