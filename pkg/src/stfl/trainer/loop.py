"""Training loop: class-weighted SGD with per-epoch test evaluation."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from stfl.config import RuntimeConfig, TrainConfig
from stfl.data.loader import ClipCache, ClipLoader
from stfl.data.manifest import class_weights, load_manifest
from stfl.data.transforms import channel_stats
from stfl.errors import NumericError
from stfl.models.checkpoint import checkpoint_save
from stfl.models.network import Network, build
from stfl.ops import weighted_softmax_cross_entropy
from stfl.trainer.evaluate import NetworkScorer, evaluate
from stfl.trainer.optim import Sgd, lr_at_epoch
from stfl.trainer.report import History, HistoryRow

logger = logging.getLogger(__name__)


@dataclass
class TrainResult:
    network: Network
    history: History = field(default_factory=History)
    best_auc: float = float("nan")
    best_auc_epoch: int = -1
    best_acc: float = float("nan")
    best_acc_epoch: int = -1
    checkpoint_path: Path | None = None
    normalization: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def losses(self) -> list[float]:
        return [row.train_loss for row in self.history.rows]


def _config_metadata(config: TrainConfig) -> dict[str, object]:
    data = asdict(config)
    data["arch"] = config.arch.to_dict()
    data["manifest_path"] = str(config.manifest_path)
    data["out_dir"] = str(config.out_dir)
    return data


def train(
    config: TrainConfig,
    *,
    runtime: RuntimeConfig | None = None,
    cache: ClipCache | None = None,
) -> TrainResult:
    """Train ``config.arch`` on the manifest's train split.

    After every epoch the test split is evaluated; the checkpoint is
    rewritten only when test ROC-AUC strictly improves, so an abort leaves
    the last good checkpoint in place. The history CSV is rewritten every
    epoch.
    """
    config.validate()
    runtime = runtime or RuntimeConfig(threads=config.threads)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    manifest = load_manifest(config.manifest_path)
    weights = class_weights(manifest, "train")
    cache = cache or ClipCache(config.cache_size)
    normalization = channel_stats(cache.get(manifest.resolve(r)) for r in manifest.split("train"))
    logger.info(
        "Class weights %s; channel mean %s std %s",
        np.round(weights, 4).tolist(), np.round(normalization[0], 4).tolist(), np.round(normalization[1], 4).tolist(),
    )

    network = build(config.arch, seed=config.seed)
    loader = ClipLoader(
        manifest, "train", config.arch.shape,
        mode="train", batch_size=config.batch_size, seed=config.seed,
        cache=cache, runtime=runtime, normalization=normalization,
    )
    scorer = NetworkScorer(network, normalization, batch_size=config.batch_size)
    optimizer = Sgd(network, config.momentum, config.weight_decay)
    result = TrainResult(network=network, normalization=normalization)

    for epoch in range(config.epochs):
        lr = lr_at_epoch(config, epoch)
        network.train()
        total, seen = 0.0, 0
        try:
            for batch in loader.epoch(epoch):
                network.zero_grad()
                logits = network.forward(batch.clips)
                loss, grad = weighted_softmax_cross_entropy(logits, batch.labels, weights)
                network.backward(grad)
                optimizer.step(lr)
                total += loss * len(batch.indices)
                seen += len(batch.indices)
        except NumericError as e:
            logger.error("Numeric failure in epoch %d: %s; keeping %s", epoch, e, result.checkpoint_path)
            raise
        train_loss = total / seen if seen else math.nan

        report = evaluate(
            scorer, manifest, "test",
            aggregation=config.aggregation,
            clips_per_video=config.eval_clips_per_video,
            cache=cache,
            curve_path=out_dir / f"roc_epoch{epoch:03d}.csv",
        )
        result.history.append(HistoryRow(epoch, lr, train_loss, report.roc_auc, report.accuracy))
        result.history.save(config.history_path)

        if result.best_acc_epoch < 0 or report.accuracy > result.best_acc:
            result.best_acc, result.best_acc_epoch = report.accuracy, epoch
        if result.best_auc_epoch < 0 or report.roc_auc > result.best_auc:
            result.best_auc, result.best_auc_epoch = report.roc_auc, epoch
            report.best_epoch = True
            checkpoint_save(network, optimizer.state_dict(), config.checkpoint_path, {
                "epoch": epoch,
                "best_auc": report.roc_auc,
                "best_acc": result.best_acc,
                "normalization": {"mean": normalization[0].tolist(), "std": normalization[1].tolist()},
                "config": _config_metadata(config),
            })
            result.checkpoint_path = config.checkpoint_path
        report.save(out_dir / f"eval_epoch{epoch:03d}.txt")

        logger.info(
            "Epoch %d: lr %.2g loss %.4f test auc %.4f acc %.4f%s",
            epoch, lr, train_loss, report.roc_auc, report.accuracy, " (best)" if report.best_epoch else "",
        )

    logger.info(
        "Best test auc %.4f at epoch %d; best test acc %.4f at epoch %d",
        result.best_auc, result.best_auc_epoch, result.best_acc, result.best_acc_epoch,
    )
    return result
