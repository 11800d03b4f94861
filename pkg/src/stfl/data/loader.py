"""Decoded-clip LRU cache and the seeded batch loader."""

from __future__ import annotations

import logging
import threading
from collections import OrderedDict
from collections.abc import Callable, Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from stfl.config import RuntimeConfig
from stfl.data.clipfile import read_clip
from stfl.data.manifest import ClipRecord, Manifest
from stfl.data.transforms import ClipWindow, normalize, sample_clip

logger = logging.getLogger(__name__)

ClipReader = Callable[[Path], np.ndarray]


class ClipCache:
    """LRU cache of decoded clip files keyed by path.

    Cached arrays are marked read-only; entries never change, so eviction
    just drops them.
    """

    def __init__(self, maxsize: int = 64, reader: ClipReader = read_clip) -> None:
        self._maxsize = maxsize
        self._reader = reader
        self._entries: OrderedDict[Path, np.ndarray] = OrderedDict()
        self._lock = threading.Lock()
        self._hits = 0
        self._misses = 0
        self._evictions = 0

    def get(self, path: str | Path) -> np.ndarray:
        """Return the decoded clip, reading it on a miss."""
        key = Path(path)
        with self._lock:
            if key in self._entries:
                self._entries.move_to_end(key)
                self._hits += 1
                return self._entries[key]
            self._misses += 1

        clip = self._reader(key)
        clip.setflags(write=False)
        if self._maxsize == 0:
            return clip
        with self._lock:
            self._entries[key] = clip
            self._entries.move_to_end(key)
            while len(self._entries) > self._maxsize:
                self._entries.popitem(last=False)
                self._evictions += 1
        return clip

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    @property
    def size(self) -> int:
        """Number of entries currently in cache."""
        return len(self._entries)

    def health(self) -> dict[str, object]:
        """Cache counters for logging."""
        lookups = self._hits + self._misses
        return {
            "cache_size": self.size,
            "maxsize": self._maxsize,
            "hits": self._hits,
            "misses": self._misses,
            "evictions": self._evictions,
            "hit_rate": round(self._hits / lookups, 4) if lookups else 0.0,
        }


@dataclass(frozen=True)
class Batch:
    clips: np.ndarray  # (N, 3, T, H, W) float32
    labels: np.ndarray  # (N,) int64
    indices: list[int]  # positions in ClipLoader.records
    windows: list[ClipWindow]


def record_seed(seed: int, epoch: int, index: int) -> np.random.Generator:
    """Per-record generator; depends only on (seed, epoch, index), never on the worker."""
    return np.random.default_rng([seed, epoch, index])


class ClipLoader:
    """Samples one clip per record per epoch and assembles batches.

    Shuffling and every per-record draw are seeded, and worker threads only
    decode and crop, so the realized (start, crop) pairs and the batch order
    are the same for any thread count.
    """

    def __init__(
        self,
        manifest: Manifest,
        split: str,
        clip_shape: tuple[int, int, int, int],
        *,
        mode: str = "train",
        batch_size: int = 8,
        seed: int = 0,
        cache: ClipCache | None = None,
        runtime: RuntimeConfig | None = None,
        normalization: tuple[np.ndarray, np.ndarray] | None = None,
    ) -> None:
        self.manifest = manifest
        self.split = split
        self.clip_shape = clip_shape
        self.mode = mode
        self.batch_size = batch_size
        self.seed = seed
        self.cache = cache or ClipCache()
        self.runtime = runtime or RuntimeConfig()
        self.normalization = normalization

        length = clip_shape[1]
        self.records: list[ClipRecord] = []
        for record in manifest.split(split):
            if record.frame_count < length:
                logger.warning(
                    "Skipping %s: %d frames, clip length is %d", record.path, record.frame_count, length,
                )
                continue
            self.records.append(record)

    def __len__(self) -> int:
        return -(-len(self.records) // self.batch_size)

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    def order(self, epoch: int) -> np.ndarray:
        if self.mode == "train":
            return np.random.default_rng([self.seed, epoch]).permutation(len(self.records))
        return np.arange(len(self.records))

    def load(self, index: int, epoch: int) -> tuple[np.ndarray, ClipWindow]:
        record = self.records[index]
        video = self.cache.get(self.manifest.resolve(record))
        _, length, h, w = self.clip_shape
        clip, window = sample_clip(video, length, (h, w), self.mode, record_seed(self.seed, epoch, index))
        if self.normalization is not None:
            clip = normalize(clip, *self.normalization)
        return clip.astype(np.float32, copy=False), window

    def epoch(self, epoch: int) -> Iterator[Batch]:
        order = [int(i) for i in self.order(epoch)]
        workers = min(self.runtime.workers, self.batch_size)
        executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
        try:
            for start in range(0, len(order), self.batch_size):
                indices = order[start:start + self.batch_size]
                if executor is None:
                    loaded = [self.load(i, epoch) for i in indices]
                else:
                    loaded = list(executor.map(lambda i: self.load(i, epoch), indices))
                yield Batch(
                    clips=np.stack([clip for clip, _ in loaded]),
                    labels=np.array([self.records[i].label for i in indices], dtype=np.int64),
                    indices=indices,
                    windows=[window for _, window in loaded],
                )
        finally:
            if executor is not None:
                executor.shutdown(wait=True)
        logger.debug("Epoch %d loader cache: %s", epoch, self.cache.health())
