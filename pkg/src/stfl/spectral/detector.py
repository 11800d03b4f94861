"""Frame-level DFT detector over manifest clips, scored per frame and per video."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from stfl.config import RuntimeConfig
from stfl.data.loader import ClipCache
from stfl.data.manifest import Manifest
from stfl.errors import DataError
from stfl.spectral.features import clip_frame_features
from stfl.spectral.kmeans import cluster_agreement, kmeans, map_clusters_to_labels
from stfl.spectral.logreg import LogRegModel, logreg_predict_batch, logreg_train
from stfl.trainer.evaluate import summarize
from stfl.trainer.report import EvalReport

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FrameFeatureSet:
    features: np.ndarray  # (M, 300)
    labels: np.ndarray  # (M,) per frame
    video_index: np.ndarray  # (M,) row of ``paths`` each frame came from
    paths: list[str]
    video_labels: np.ndarray


def extract_features(
    manifest: Manifest,
    split: str,
    *,
    cache: ClipCache | None = None,
    frame_stride: int = 1,
    runtime: RuntimeConfig | None = None,
) -> FrameFeatureSet:
    """Spectrum features of every ``frame_stride``-th frame of every clip in ``split``."""
    records = manifest.split(split)
    if not records:
        raise DataError(f"split '{split}' is empty")
    cache = cache or ClipCache()
    runtime = runtime or RuntimeConfig()

    def one(index: int) -> np.ndarray:
        record = records[index]
        video = cache.get(manifest.resolve(record))[:, ::frame_stride]
        return clip_frame_features(video, source=record.path)

    with ThreadPoolExecutor(max_workers=runtime.workers) as pool:
        per_video = list(pool.map(one, range(len(records))))
    counts = [f.shape[0] for f in per_video]
    video_labels = np.array([r.label for r in records], dtype=np.int64)
    return FrameFeatureSet(
        features=np.concatenate(per_video),
        labels=np.repeat(video_labels, counts),
        video_index=np.repeat(np.arange(len(records)), counts),
        paths=[r.path for r in records],
        video_labels=video_labels,
    )


class DftDetector:
    """:class:`~stfl.scoring.ClipScorer` backed by logistic regression on spectra."""

    name = "dft"

    def __init__(self, model: LogRegModel, *, frame_stride: int = 1) -> None:
        self.model = model
        self.frame_stride = frame_stride

    def frame_scores(self, video: np.ndarray) -> np.ndarray:
        return logreg_predict_batch(self.model, clip_frame_features(video[:, ::self.frame_stride]))

    def sample_video(self, video: np.ndarray, count: int) -> list[np.ndarray]:
        return [video]

    def score_video(self, clips: Sequence[np.ndarray]) -> list[float]:
        return [float(self.frame_scores(clip).mean()) for clip in clips]


def dft_train(features: FrameFeatureSet, **kwargs: float) -> LogRegModel:
    return logreg_train(features.features, features.labels, **kwargs)  # type: ignore[arg-type]


def video_scores(frame_scores: np.ndarray, features: FrameFeatureSet) -> np.ndarray:
    """Mean frame probability per video."""
    sums = np.bincount(features.video_index, weights=frame_scores, minlength=len(features.paths))
    counts = np.bincount(features.video_index, minlength=len(features.paths))
    return sums / counts


def dft_evaluate(
    model: LogRegModel,
    features: FrameFeatureSet,
    *,
    split: str = "test",
    curve_prefix: str | Path | None = None,
) -> tuple[EvalReport, EvalReport]:
    """(video-level, frame-level) reports from one pass over the frames."""
    frame_scores = logreg_predict_batch(model, features.features)
    curves = (None, None)
    if curve_prefix is not None:
        curves = (f"{curve_prefix}_video.csv", f"{curve_prefix}_frame.csv")
    video_report, _ = summarize(
        video_scores(frame_scores, features), features.video_labels,
        method="dft", split=split, aggregation="video", curve_path=curves[0],
    )
    frame_report, _ = summarize(
        frame_scores, features.labels,
        method="dft", split=split, aggregation="frame", curve_path=curves[1],
    )
    return video_report, frame_report


def dft_cluster(features: np.ndarray, seed: int = 0, labels: np.ndarray | None = None) -> np.ndarray:
    """Unsupervised labels from 2-means on standardized features."""
    x = np.asarray(features, dtype=np.float64)
    std = x.std(axis=0)
    std[std == 0] = 1.0
    xs = (x - x.mean(axis=0)) / std
    result = kmeans(xs, 2, seed=seed)
    mapping = map_clusters_to_labels(result, x, labels)
    predicted = mapping[result.assignments]
    if labels is not None:
        logger.info("k-means agreement with labels: %.4f", cluster_agreement(predicted, labels))
    return predicted
