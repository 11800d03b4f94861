"""Lloyd's k-means with k-means++ seeding, and cluster-to-label mapping."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from stfl.errors import ConfigurationError, DataError, DimensionError

logger = logging.getLogger(__name__)

# Fraction of the profile (highest radii) used as the high-frequency energy cue.
HIGH_FREQUENCY_FRACTION = 1 / 3


@dataclass
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    inertia_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def _sq_distances(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centroids = [x[rng.integers(x.shape[0])]]
    for _ in range(1, k):
        d2 = _sq_distances(x, np.array(centroids)).min(axis=1)
        total = d2.sum()
        if total == 0:
            idx = int(rng.integers(x.shape[0]))
        else:
            idx = int(rng.choice(x.shape[0], p=d2 / total))
        centroids.append(x[idx])
    return np.array(centroids)


def kmeans(features: np.ndarray, k: int, seed: int = 0, max_iters: int = 300) -> KMeansResult:
    """Cluster rows of ``features``.

    ``inertia_trace`` has one entry per assignment step. When ``max_iters``
    ends the loop first, a last entry scores the returned centroids against
    the returned assignments, so ``inertia`` always describes the result.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DataError("k-means needs a non-empty (n, d) feature matrix")
    if not 1 <= k <= x.shape[0]:
        raise DimensionError(f"k must be in 1..{x.shape[0]}, got {k}")
    if max_iters < 1:
        raise ConfigurationError(f"max_iters must be >= 1, got {max_iters}")
    rng = np.random.default_rng(seed)
    centroids = _plus_plus(x, k, rng)
    assignments = np.full(x.shape[0], -1)
    trace: list[float] = []
    converged = False
    iterations = 0

    for iterations in range(1, max_iters + 1):
        d2 = _sq_distances(x, centroids)
        new = d2.argmin(axis=1)
        point_d2 = d2[np.arange(x.shape[0]), new]
        trace.append(float(point_d2.sum()))
        if np.array_equal(new, assignments):
            converged = True
            break
        assignments = new
        for c in range(k):
            members = assignments == c
            if members.any():
                centroids[c] = x[members].mean(axis=0)
            else:
                far = int(point_d2.argmax())
                logger.warning("k-means cluster %d empty; reseeding at sample %d", c, far)
                centroids[c] = x[far]
                point_d2[far] = 0.0

    if not converged:
        trace.append(float(((x - centroids[assignments]) ** 2).sum()))
        logger.warning("k-means stopped after %d iterations without converging", iterations)
    return KMeansResult(assignments, centroids, trace[-1], trace, iterations, converged)


def map_clusters_to_labels(
    result: KMeansResult,
    features: np.ndarray,
    labels: np.ndarray | None = None,
) -> np.ndarray:
    """Label (0 real, 1 fake) for each cluster of a k=2 result.

    With labels (``-1`` marks unknown samples) each cluster takes the
    majority label of its known members. Otherwise the cluster with higher
    mean high-frequency energy is called fake.
    """
    k = result.centroids.shape[0]
    if labels is not None:
        y = np.asarray(labels)
        mapping = np.zeros(k, dtype=np.int64)
        for c in range(k):
            known = y[(result.assignments == c) & (y >= 0)]
            mapping[c] = int(np.round(known.mean())) if known.size else 0
        if np.any(y >= 0):
            return mapping
    x = np.asarray(features, dtype=np.float64)
    start = int(x.shape[1] * (1 - HIGH_FREQUENCY_FRACTION))
    energy = np.array([
        x[result.assignments == c, start:].mean() if np.any(result.assignments == c) else -np.inf
        for c in range(k)
    ])
    mapping = np.zeros(k, dtype=np.int64)
    mapping[int(energy.argmax())] = 1
    return mapping


def cluster_agreement(predicted: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of samples whose mapped cluster label equals the true label."""
    return float(np.mean(np.asarray(predicted) == np.asarray(labels)))
