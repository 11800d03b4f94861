"""Tests for the optimizer, metrics, reports and the training loop."""

import csv
import math
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from stfl.config import RuntimeConfig, TrainConfig
from stfl.data import SynthConfig, load_manifest, synth_dataset
from stfl.errors import ConfigurationError, DataError, DimensionError, FormatError, NumericError
from stfl.models import ArchSpec, checkpoint_load
from stfl.trainer import (
    EvalReport,
    History,
    HistoryRow,
    NetworkScorer,
    accuracy,
    evaluate,
    lr_at_epoch,
    roc_auc,
    roc_curve,
    sgd_step,
    train,
)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _pair_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (pos.size * neg.size)


def _make_scored(seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 201))
    labels = rng.integers(0, 2, n)
    labels[:2] = (0, 1)
    # coarse grid so ties occur
    scores = np.round(rng.random(n) + 0.3 * labels, 1)
    return scores, labels


def _make_config(tmp_path: Path, family: str = "mc3", epochs: int = 2, **kw) -> TrainConfig:
    data_dir = tmp_path / "data"
    if not (data_dir / "manifest.csv").exists():
        synth_dataset(SynthConfig(4, 4, frames=16, hw=32, test_fraction=0.25, seed=3), data_dir)
    shape = (3, 10, 32, 32) if family == "rcn" else (3, 16, 32, 32)
    return TrainConfig(
        arch=ArchSpec(family, width_multiplier=0.25, clip_shape=shape),
        manifest_path=data_dir / "manifest.csv",
        out_dir=tmp_path / kw.pop("run", "run"),
        epochs=epochs,
        batch_size=3,
        **kw,
    )


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


class TestLearningRate:
    def test_step_schedule(self) -> None:
        schedule = SimpleNamespace(base_lr=0.001, lr_step=10, lr_gamma=0.1)
        assert lr_at_epoch(schedule, 0) == 0.001
        assert lr_at_epoch(schedule, 9) == 0.001
        assert lr_at_epoch(schedule, 10) == pytest.approx(1e-4)
        assert lr_at_epoch(schedule, 25) == pytest.approx(1e-5)

    def test_negative_epoch(self) -> None:
        with pytest.raises(ValueError):
            lr_at_epoch(SimpleNamespace(base_lr=0.1, lr_step=1, lr_gamma=0.5), -1)


class TestSgdStep:
    def test_plain_descent(self) -> None:
        params, _ = sgd_step({"w": np.array([1.0])}, {"w": np.array([0.5])}, {}, 0.1, 0.0, 0.0)
        assert params["w"][0] == pytest.approx(0.95)

    def test_momentum_two_steps(self) -> None:
        w, v = {"w": np.array([1.0])}, {}
        g = {"w": np.array([1.0])}
        w, v = sgd_step(w, g, v, 0.1, 0.9, 0.0)
        assert w["w"][0] == pytest.approx(0.9)
        w, v = sgd_step(w, g, v, 0.1, 0.9, 0.0)
        assert v["w"][0] == pytest.approx(1.9)
        assert w["w"][0] == pytest.approx(0.71)

    def test_decay_only(self) -> None:
        w = np.array([2.0, -4.0])
        params, _ = sgd_step({"w": w}, {"w": np.zeros(2)}, {}, 1.0, 0.0, 0.0005)
        np.testing.assert_allclose(params["w"], w * (1 - 0.0005))

    def test_inputs_unchanged_and_dtype_kept(self) -> None:
        w = np.ones(3, dtype=np.float32)
        params, velocity = sgd_step({"w": w}, {"w": np.ones(3)}, {}, 0.1, 0.9, 0.0)
        np.testing.assert_array_equal(w, 1.0)
        assert params["w"].dtype == np.float32
        assert velocity["w"].dtype == np.float32

    def test_non_finite_gradient(self) -> None:
        with pytest.raises(NumericError, match="sgd_step: non-finite gradient for 'w'"):
            sgd_step({"w": np.ones(2)}, {"w": np.array([1.0, np.inf])}, {}, 0.1, 0.9, 0.0)

    def test_missing_gradient(self) -> None:
        with pytest.raises(DimensionError, match="no gradient for parameter 'w'"):
            sgd_step({"w": np.ones(2)}, {}, {}, 0.1, 0.9, 0.0)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


class TestRoc:
    def test_perfect_and_inverted(self) -> None:
        labels = np.array([0, 0, 1, 1])
        assert roc_auc(np.array([0.1, 0.2, 0.8, 0.9]), labels) == 1.0
        assert roc_auc(np.array([0.9, 0.8, 0.2, 0.1]), labels) == 0.0

    def test_all_tied_is_half(self) -> None:
        assert roc_auc(np.full(6, 0.5), np.array([0, 1, 0, 1, 0, 1])) == 0.5

    def test_negated_scores_complement(self) -> None:
        rng = np.random.default_rng(11)
        scores = rng.permutation(40) / 40.0
        labels = np.array([0, 1] * 20)
        assert abs(roc_auc(scores, labels) + roc_auc(-scores, labels) - 1.0) <= 1e-12

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_pair_counting(self, seed: int) -> None:
        scores, labels = _make_scored(seed)
        assert abs(roc_auc(scores, labels) - _pair_auc(scores, labels)) <= 1e-12

    def test_curve_area_equals_auc(self) -> None:
        for seed in range(10):
            scores, labels = _make_scored(seed)
            curve = roc_curve(scores, labels)
            assert abs(curve.area() - roc_auc(scores, labels)) <= 1e-12
            assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
            assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)
            assert curve.thresholds[0] == math.inf

    def test_curve_csv(self, tmp_path) -> None:
        curve = roc_curve(np.array([0.2, 0.7]), np.array([0, 1]))
        curve.save(tmp_path / "roc.csv")
        lines = (tmp_path / "roc.csv").read_text().splitlines()
        assert lines[0] == "threshold,fpr,tpr"
        assert lines[1] == "inf,0,0"
        assert len(lines) == 4

    def test_single_class(self) -> None:
        with pytest.raises(DataError, match="both classes"):
            roc_auc(np.array([0.1, 0.2]), np.array([1, 1]))

    def test_accuracy_threshold_inclusive(self) -> None:
        assert accuracy(np.array([0.5, 0.4, 0.7]), np.array([1, 0, 0])) == pytest.approx(2 / 3)

    def test_accuracy_length_mismatch(self) -> None:
        with pytest.raises(DimensionError):
            accuracy(np.array([0.5]), np.array([1, 0]))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


class TestReports:
    def test_four_decimals(self) -> None:
        report = EvalReport("r3d", "test", "video", roc_auc=0.987654, accuracy=0.5, n=10, n_real=5, n_fake=5)
        text = report.to_text()
        assert "roc_auc: 0.9877\n" in text
        assert "accuracy: 0.5000\n" in text
        assert "best_epoch: false\n" in text

    def test_text_round_trip_at_report_precision(self) -> None:
        report = EvalReport("dft", "test", "frame", roc_auc=0.75, accuracy=0.625, n=8, best_epoch=True)
        assert EvalReport.from_text(report.to_text()) == report

    def test_malformed_report(self) -> None:
        with pytest.raises(FormatError, match="malformed evaluation report"):
            EvalReport.from_text("method: r3d\n")

    def test_history_csv(self, tmp_path) -> None:
        history = History()
        history.append(HistoryRow(0, 0.001, 0.693147, 0.51234, 0.5))
        history.append(HistoryRow(1, 0.001, 0.5, float("nan"), 0.75))
        history.save(tmp_path / "history.csv")
        lines = (tmp_path / "history.csv").read_text().splitlines()
        assert lines == [
            "epoch,lr,train_loss,test_auc,test_acc",
            "0,0.001,0.693147,0.5123,0.5000",
            "1,0.001,0.500000,nan,0.7500",
        ]
        loaded = History.load(tmp_path / "history.csv")
        assert loaded.rows[0].test_auc == 0.5123


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


class TestTrain:
    def test_short_run_writes_artifacts(self, tmp_path) -> None:
        config = _make_config(tmp_path)
        result = train(config, runtime=RuntimeConfig(1))
        out = config.out_dir
        for name in ("history.csv", "best.ckpt", "roc_epoch000.csv", "roc_epoch001.csv",
                     "eval_epoch000.txt", "eval_epoch001.txt"):
            assert (out / name).is_file(), name
        assert len(result.history.rows) == 2
        assert all(math.isfinite(loss) for loss in result.losses)
        assert [row.lr for row in result.history.rows] == [lr_at_epoch(config, e) for e in range(2)]
        assert result.checkpoint_path == out / "best.ckpt"
        assert 0 <= result.best_auc_epoch < 2

    def test_best_epoch_is_first_maximum_of_history(self, tmp_path) -> None:
        config = _make_config(tmp_path, epochs=3)
        result = train(config, runtime=RuntimeConfig(1))
        aucs = [row.test_auc for row in result.history.rows]
        assert result.best_auc == max(aucs)
        assert result.best_auc_epoch == aucs.index(max(aucs))
        accs = [row.test_acc for row in result.history.rows]
        assert result.best_acc == max(accs)
        assert result.best_acc_epoch == accs.index(max(accs))

        with open(config.history_path, newline="") as f:
            column = [float(row["test_auc"]) for row in csv.DictReader(f)]
        assert result.best_auc == pytest.approx(max(column), abs=5e-5)
        assert column.index(max(column)) <= result.best_auc_epoch
        assert checkpoint_load(config.checkpoint_path).metadata["epoch"] == result.best_auc_epoch

    def test_checkpoint_scores_like_trained_network(self, tmp_path) -> None:
        config = _make_config(tmp_path, epochs=1)
        train(config, runtime=RuntimeConfig(1))
        loaded = checkpoint_load(config.checkpoint_path)
        assert loaded.metadata["epoch"] == 0
        norm = loaded.metadata["normalization"]
        assert len(norm["mean"]) == 3 and len(norm["std"]) == 3
        scorer = NetworkScorer(loaded.network, (np.array(norm["mean"]), np.array(norm["std"])))
        report = evaluate(scorer, load_manifest(config.manifest_path), "test")
        saved = EvalReport.from_text((config.out_dir / "eval_epoch000.txt").read_text())
        assert report.roc_auc == pytest.approx(saved.roc_auc, abs=5e-5)

    def test_same_seed_same_bytes_for_any_thread_count(self, tmp_path) -> None:
        a = _make_config(tmp_path, run="a")
        b = _make_config(tmp_path, run="b")
        train(a, runtime=RuntimeConfig(1))
        train(b, runtime=RuntimeConfig(3))
        for name in ("history.csv", "roc_epoch000.csv", "roc_epoch001.csv"):
            assert (a.out_dir / name).read_bytes() == (b.out_dir / name).read_bytes(), name

    def test_invalid_config(self, tmp_path) -> None:
        with pytest.raises(ConfigurationError, match="epochs"):
            train(_make_config(tmp_path, epochs=0))


@pytest.mark.slow
class TestDeskScaleDetection:
    @staticmethod
    def _dataset(tmp_path: Path, strength: float) -> Path:
        synth_dataset(
            SynthConfig(150, 150, frames=16, hw=32, artifact_strength=strength, seed=7, test_fraction=1 / 3),
            tmp_path / "data",
        )
        return tmp_path / "data" / "manifest.csv"

    def test_r3d_separates_artifacts(self, tmp_path) -> None:
        manifest = self._dataset(tmp_path, 0.5)
        assert load_manifest(manifest).split_counts() == {"train": (100, 100), "test": (50, 50)}
        config = TrainConfig(
            arch=ArchSpec("r3d", width_multiplier=0.25, clip_shape=(3, 16, 32, 32)),
            manifest_path=manifest, out_dir=tmp_path / "run", epochs=10, seed=7,
        )
        assert train(config).best_auc >= 0.95

    @pytest.mark.parametrize("family", ["mc3", "r2plus1d", "rcn"])
    def test_other_families_reduce_loss(self, tmp_path, family: str) -> None:
        manifest = self._dataset(tmp_path, 0.5)
        shape = (3, 10, 32, 32) if family == "rcn" else (3, 16, 32, 32)
        config = TrainConfig(
            arch=ArchSpec(family, width_multiplier=0.25, clip_shape=shape),
            manifest_path=manifest, out_dir=tmp_path / "run", epochs=3, seed=7,
        )
        losses = train(config).losses
        assert all(math.isfinite(loss) for loss in losses)
        assert losses[-1] < losses[0]

    def test_null_control(self, tmp_path) -> None:
        manifest = self._dataset(tmp_path, 0.0)
        config = TrainConfig(
            arch=ArchSpec("r3d", width_multiplier=0.25, clip_shape=(3, 16, 32, 32)),
            manifest_path=manifest, out_dir=tmp_path / "run", epochs=3, seed=7,
        )
        result = train(config)
        assert 0.4 <= result.history.rows[-1].test_auc <= 0.6

    def test_overfits_eight_clips(self, tmp_path) -> None:
        synth_dataset(SynthConfig(5, 5, frames=16, hw=32, seed=1, test_fraction=0.2), tmp_path / "data")
        config = TrainConfig(
            arch=ArchSpec("r3d", width_multiplier=0.25, clip_shape=(3, 16, 32, 32)),
            manifest_path=tmp_path / "data" / "manifest.csv", out_dir=tmp_path / "run",
            epochs=50, batch_size=8, lr_step=100,
        )
        result = train(config)
        assert result.losses[-1] < result.losses[0]
        scorer = NetworkScorer(result.network, result.normalization)
        report = evaluate(scorer, load_manifest(config.manifest_path), "train")
        assert report.n == 8
        assert report.accuracy == 1.0
