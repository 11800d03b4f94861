"""Scoring interface shared by the network and spectral detectors.

Defines the ClipScorer Protocol that evaluation depends on. Concrete
scorers live in :mod:`stfl.trainer.evaluate` (networks) and
:mod:`stfl.spectral.detector` (DFT features + logistic regression).
"""

from __future__ import annotations

from collections.abc import Sequence
from typing import Protocol, runtime_checkable

import numpy as np


@runtime_checkable
class ClipScorer(Protocol):
    """Anything that turns the clips of one video into fake-probabilities.

    ``sample_video`` takes a whole decoded (3, T, H, W) video in [0, 1] and
    returns up to ``count`` deterministic evaluation inputs;
    ``score_video`` returns one probability per input.
    """

    name: str

    def sample_video(self, video: np.ndarray, count: int) -> list[np.ndarray]: ...

    def score_video(self, clips: Sequence[np.ndarray]) -> list[float]: ...
