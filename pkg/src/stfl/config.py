"""stfl configuration: plain frozen dataclasses, no pydantic.

The host (the CLI, a notebook, a test) constructs these from its own
settings and passes them in. Library code never reads environment variables.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from pathlib import Path

from stfl.errors import ConfigurationError
from stfl.models.arch import ArchSpec

AGGREGATIONS = ("clip", "video")


@dataclass(frozen=True)
class RuntimeConfig:
    """Worker parallelism; ``threads == 0`` means one worker per CPU."""

    threads: int = 0

    def __post_init__(self) -> None:
        if self.threads < 0:
            raise ConfigurationError(f"threads must be >= 0, got {self.threads}")

    @property
    def workers(self) -> int:
        return self.threads or (os.cpu_count() or 1)


@dataclass(frozen=True)
class TrainConfig:
    arch: ArchSpec
    manifest_path: Path
    out_dir: Path
    epochs: int = 30
    batch_size: int = 8
    base_lr: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.0005
    lr_step: int = 10
    lr_gamma: float = 0.1
    seed: int = 0
    eval_clips_per_video: int = 1
    aggregation: str = "video"
    threads: int = 0
    cache_size: int = 64

    def validate(self) -> TrainConfig:
        """Raise :class:`ConfigurationError` on the first invalid field."""
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        for name in ("base_lr", "lr_gamma"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("momentum", "weight_decay"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.lr_step < 1:
            raise ConfigurationError(f"lr_step must be >= 1, got {self.lr_step}")
        if self.eval_clips_per_video < 1:
            raise ConfigurationError(f"eval_clips_per_video must be >= 1, got {self.eval_clips_per_video}")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigurationError(
                f"aggregation must be one of {', '.join(AGGREGATIONS)}, got '{self.aggregation}'"
            )
        if self.threads < 0 or self.cache_size < 0:
            raise ConfigurationError("threads and cache_size must be >= 0")
        return self

    def with_overrides(self, **changes: object) -> TrainConfig:
        return replace(self, **changes).validate()  # type: ignore[arg-type]

    @property
    def checkpoint_path(self) -> Path:
        return Path(self.out_dir) / "best.ckpt"

    @property
    def history_path(self) -> Path:
        return Path(self.out_dir) / "history.csv"
