"""Scoring a manifest split with any ClipScorer and summarizing the result."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from stfl.config import AGGREGATIONS
from stfl.data.loader import ClipCache
from stfl.data.manifest import Manifest
from stfl.data.transforms import eval_starts, normalize, sample_clip
from stfl.errors import ConfigurationError, DataError
from stfl.models.network import Network
from stfl.ops import softmax
from stfl.scoring import ClipScorer
from stfl.trainer.metrics import RocCurve, accuracy, roc_auc, roc_curve
from stfl.trainer.report import EvalReport

logger = logging.getLogger(__name__)


class NetworkScorer:
    """Fake-probability of a network in eval mode for centered, evenly spaced clips."""

    def __init__(
        self,
        network: Network,
        normalization: tuple[np.ndarray, np.ndarray] | None = None,
        batch_size: int = 8,
    ) -> None:
        self.network = network
        self.normalization = normalization
        self.batch_size = batch_size
        self.name = network.arch.family.value

    def sample_video(self, video: np.ndarray, count: int) -> list[np.ndarray]:
        _, length, h, w = self.network.arch.shape
        clips = []
        for start in eval_starts(video.shape[1], length, count):
            clip, _ = sample_clip(video, length, (h, w), "eval", start=start)
            if self.normalization is not None:
                clip = normalize(clip, *self.normalization)
            clips.append(clip)
        return clips

    def score_video(self, clips: Sequence[np.ndarray]) -> list[float]:
        self.network.eval()
        scores: list[float] = []
        for i in range(0, len(clips), self.batch_size):
            logits = self.network.forward(np.stack(clips[i:i + self.batch_size]))
            scores.extend(float(p) for p in softmax(logits)[:, 1])
        return scores


@dataclass(frozen=True)
class ScoredSplit:
    scores: np.ndarray
    labels: np.ndarray
    keys: list[str]  # record path, suffixed with '#k' per clip in clip aggregation


def score_split(
    scorer: ClipScorer,
    manifest: Manifest,
    split: str = "test",
    *,
    aggregation: str = "video",
    clips_per_video: int = 1,
    cache: ClipCache | None = None,
) -> ScoredSplit:
    """One score per video (mean over its clips) or one per clip."""
    if aggregation not in AGGREGATIONS:
        raise ConfigurationError(f"aggregation must be one of {', '.join(AGGREGATIONS)}")
    cache = cache or ClipCache()
    scores: list[float] = []
    labels: list[int] = []
    keys: list[str] = []
    for record in manifest.split(split):
        video = cache.get(manifest.resolve(record))
        try:
            clips = scorer.sample_video(video, clips_per_video)
        except DataError as e:
            logger.warning("Skipping %s: %s", record.path, e)
            continue
        clip_scores = scorer.score_video(clips)
        if aggregation == "video":
            scores.append(float(np.mean(clip_scores)))
            labels.append(record.label)
            keys.append(record.path)
        else:
            scores.extend(clip_scores)
            labels.extend([record.label] * len(clip_scores))
            keys.extend(f"{record.path}#{k}" for k in range(len(clip_scores)))
    if not scores:
        raise DataError(f"split '{split}' has no scorable records")
    return ScoredSplit(np.array(scores), np.array(labels, dtype=np.int64), keys)


def summarize(
    scores: np.ndarray,
    labels: np.ndarray,
    *,
    method: str,
    split: str,
    aggregation: str,
    curve_path: str | Path | None = None,
) -> tuple[EvalReport, RocCurve]:
    """Report and ROC curve for scored samples; the curve is written when a path is given."""
    curve = roc_curve(scores, labels)
    n_fake = int(np.sum(labels))
    report = EvalReport(
        method=method,
        split=split,
        aggregation=aggregation,
        roc_auc=roc_auc(scores, labels),
        accuracy=accuracy(scores, labels),
        n=int(labels.size),
        n_real=int(labels.size) - n_fake,
        n_fake=n_fake,
        curve_file=str(curve_path) if curve_path is not None else "",
    )
    if curve_path is not None:
        curve.save(curve_path)
    return report, curve


def evaluate(
    scorer: ClipScorer,
    manifest: Manifest,
    split: str = "test",
    *,
    aggregation: str = "video",
    clips_per_video: int = 1,
    cache: ClipCache | None = None,
    curve_path: str | Path | None = None,
) -> EvalReport:
    scored = score_split(
        scorer, manifest, split, aggregation=aggregation, clips_per_video=clips_per_video, cache=cache,
    )
    report, _ = summarize(
        scored.scores, scored.labels,
        method=scorer.name, split=split, aggregation=aggregation, curve_path=curve_path,
    )
    logger.info(
        "%s on %s (%s): auc %.4f acc %.4f n=%d",
        report.method, split, aggregation, report.roc_auc, report.accuracy, report.n,
    )
    return report
