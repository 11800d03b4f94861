"""``stfl`` command line: dataset synthesis, training, evaluation and diagnostics.

Every command accepts ``--seed``. Library errors are turned into exit codes
here and nowhere else (see :func:`stfl.errors.exit_code_for`).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np

from stfl import __version__
from stfl.config import AGGREGATIONS, RuntimeConfig, TrainConfig
from stfl.constants import FACE_CROP_SIZE, GRADCHECK_STEP, GRADCHECK_TOL, ExitCode, Family
from stfl.data import (
    ClipCache,
    SynthConfig,
    crop_faces,
    load_boxes,
    load_manifest,
    read_frames,
    synth_dataset,
    write_clip,
)
from stfl.diagnostics import CASES, gradcheck_suite
from stfl.errors import ConfigurationError, StflError, UsageError, exit_code_for
from stfl.models import ArchSpec, build, checkpoint_load, param_count
from stfl.spectral import (
    LogRegModel,
    dft_cluster,
    dft_evaluate,
    dft_train,
    extract_features,
    feature_stats,
)
from stfl.trainer import NetworkScorer, evaluate, train

logger = logging.getLogger(__name__)

THREADS_ENV = "STFL_THREADS"


class _Parser(argparse.ArgumentParser):
    """Raises instead of exiting so :func:`run` owns every exit code."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message, usage=self.format_usage())


def _runtime_from_env() -> RuntimeConfig:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return RuntimeConfig()
    try:
        return RuntimeConfig(threads=int(raw))
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got '{raw}'") from None


def _arch_from_args(args: argparse.Namespace) -> ArchSpec:
    shape = None
    if args.clip_frames is not None or args.clip_size is not None:
        default = ArchSpec(args.arch).shape
        frames = args.clip_frames if args.clip_frames is not None else default[1]
        size = args.clip_size if args.clip_size is not None else default[2]
        shape = (3, frames, size, size)
    return ArchSpec(args.arch, width_multiplier=args.width_mult, clip_shape=shape)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace, runtime: RuntimeConfig) -> int:
    config = SynthConfig(
        n_real=args.n_real,
        n_fake=args.n_fake,
        frames=args.frames,
        hw=args.hw,
        artifact_strength=args.artifact_strength,
        seed=args.seed,
        test_fraction=args.test_fraction,
    )
    manifest = synth_dataset(config, args.out)
    counts = manifest.split_counts()
    print(f"Wrote {len(manifest.records)} clips to {args.out} ({counts})")
    return ExitCode.OK


def cmd_crop_faces(args: argparse.Namespace, runtime: RuntimeConfig) -> int:
    frames = read_frames(args.frames_dir)
    boxes = load_boxes(args.boxes)
    crops = crop_faces(frames, boxes, args.size)
    clip = np.clip(crops.transpose(1, 0, 2, 3), 0.0, 1.0)
    write_clip(args.out, clip)
    print(f"Wrote {clip.shape[1]} face crops of {args.size}x{args.size} to {args.out}")
    return ExitCode.OK


def cmd_train(args: argparse.Namespace, runtime: RuntimeConfig) -> int:
    config = TrainConfig(
        arch=_arch_from_args(args),
        manifest_path=Path(args.manifest),
        out_dir=Path(args.out),
        epochs=args.epochs,
        batch_size=args.batch,
        base_lr=args.lr,
        momentum=args.momentum,
        weight_decay=args.weight_decay,
        lr_step=args.lr_step,
        lr_gamma=args.lr_gamma,
        seed=args.seed,
        eval_clips_per_video=args.eval_clips,
        aggregation=args.aggregation,
        threads=runtime.threads,
        cache_size=args.cache_size,
    ).validate()
    result = train(config, runtime=runtime)
    print(
        f"best test roc_auc {result.best_auc:.4f} (epoch {result.best_auc_epoch}), "
        f"best test accuracy {result.best_acc:.4f} (epoch {result.best_acc_epoch}); "
        f"checkpoint {result.checkpoint_path}"
    )
    return ExitCode.OK


def cmd_eval(args: argparse.Namespace, runtime: RuntimeConfig) -> int:
    checkpoint = checkpoint_load(args.ckpt)
    normalization = checkpoint.normalization()
    if normalization is None:
        logger.warning("Checkpoint %s has no normalization statistics; scoring raw clips", args.ckpt)
    scorer = NetworkScorer(checkpoint.network, normalization, batch_size=args.batch)
    report = evaluate(
        scorer, load_manifest(args.manifest), args.split,
        aggregation=args.aggregation,
        clips_per_video=args.eval_clips,
        cache=ClipCache(args.cache_size),
        curve_path=args.roc,
    )
    if args.report:
        report.save(args.report)
    sys.stdout.write(report.to_text())
    return ExitCode.OK


def cmd_dft_train(args: argparse.Namespace, runtime: RuntimeConfig) -> int:
    features = extract_features(
        load_manifest(args.manifest), args.split, frame_stride=args.frame_stride, runtime=runtime,
    )
    model = dft_train(features, l2=args.l2, lr=args.lr, max_iters=args.max_iters)
    model.save(args.out_model)
    print(
        f"Trained on {features.features.shape[0]} frames from {len(features.paths)} clips: "
        f"{model.iterations} iterations, final loss {model.final_loss:.4f}"
    )
    if args.cluster:
        predicted = dft_cluster(features.features, seed=args.seed)
        agreement = float(np.mean(predicted == features.labels))
        print(f"k-means agreement with labels: {agreement:.4f}")
    return ExitCode.OK


def cmd_dft_eval(args: argparse.Namespace, runtime: RuntimeConfig) -> int:
    model = LogRegModel.load(args.model)
    features = extract_features(
        load_manifest(args.manifest), args.split, frame_stride=args.frame_stride, runtime=runtime,
    )
    video_report, frame_report = dft_evaluate(model, features, split=args.split, curve_prefix=args.roc)
    if args.report:
        report_path = Path(args.report)
        video_report.save(report_path)
        frame_report.save(report_path.with_name(f"{report_path.stem}_frame{report_path.suffix}"))
    sys.stdout.write(video_report.to_text())
    sys.stdout.write(frame_report.to_text())
    return ExitCode.OK


def cmd_dft_stats(args: argparse.Namespace, runtime: RuntimeConfig) -> int:
    features = extract_features(
        load_manifest(args.manifest), args.split, frame_stride=args.frame_stride, runtime=runtime,
    )
    stats = feature_stats(features.features, features.labels)
    stats.save(args.out_csv)
    share = stats.within_one_std()
    logger.info("Class means within one pooled std on %.4f of %d bins", share, stats.bins)
    print(f"Wrote {stats.bins}-bin spectrum statistics to {args.out_csv}; within one std: {share:.4f}")
    return ExitCode.OK


def cmd_gradcheck(args: argparse.Namespace, runtime: RuntimeConfig) -> int:
    if args.all and args.op:
        raise UsageError("--all and --op are mutually exclusive")
    reports = gradcheck_suite(args.op or None, tol=args.tol, step=args.step, seed=args.seed)
    for report in reports:
        print(report.summary())
    failed = [r.op for r in reports if not r.passed]
    if failed:
        print(f"{len(failed)} of {len(reports)} cases failed: {', '.join(failed)}", file=sys.stderr)
        return ExitCode.NUMERIC
    return ExitCode.OK


def cmd_params(args: argparse.Namespace, runtime: RuntimeConfig) -> int:
    network = build(_arch_from_args(args), seed=args.seed)
    print(param_count(network))
    return ExitCode.OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_arch_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--arch", required=True, choices=[f.value for f in Family])
    p.add_argument("--width-mult", type=float, default=1.0, help="channel width multiplier (default 1.0)")
    p.add_argument("--clip-frames", type=int, default=None, help="override the clip length")
    p.add_argument("--clip-size", type=int, default=None, help="override the square clip side")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stfl", description="Spatiotemporal deepfake detectors and a spectral baseline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")

    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def command(name: str, fn: Callable[[argparse.Namespace, RuntimeConfig], int], help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help, description=help)
        p.set_defaults(func=fn)
        return p

    p = command("synth", cmd_synth, "Write a synthetic real/fake clip dataset and its manifest.")
    p.add_argument("--n-real", type=int, required=True)
    p.add_argument("--n-fake", type=int, required=True)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--hw", type=int, default=32)
    p.add_argument("--artifact-strength", type=float, default=0.5)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--out", required=True, help="output directory")

    p = command("crop-faces", cmd_crop_faces, "Crop a frame directory to its face boxes and write a clip file.")
    p.add_argument("--frames-dir", required=True)
    p.add_argument("--boxes", required=True, help="CSV with frame,x,y,w,h")
    p.add_argument("--size", type=int, default=FACE_CROP_SIZE)
    p.add_argument("--out", required=True, help="output clip file")

    p = command("train", cmd_train, "Train a detector network; checkpoints on best test ROC-AUC.")
    _add_arch_args(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=0.0005)
    p.add_argument("--lr-step", type=int, default=10)
    p.add_argument("--lr-gamma", type=float, default=0.1)
    p.add_argument("--eval-clips", type=int, default=1)
    p.add_argument("--aggregation", choices=AGGREGATIONS, default="video")
    p.add_argument("--cache-size", type=int, default=64)

    p = command("eval", cmd_eval, "Evaluate a checkpoint on a manifest split.")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--aggregation", choices=AGGREGATIONS, default="video")
    p.add_argument("--eval-clips", type=int, default=1)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--cache-size", type=int, default=64)
    p.add_argument("--report", default=None, help="evaluation report path")
    p.add_argument("--roc", default=None, help="ROC curve CSV path")

    p = command("dft-train", cmd_dft_train, "Fit the spectral logistic-regression detector.")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-model", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--frame-stride", type=int, default=1)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--max-iters", type=int, default=10000)
    p.add_argument("--cluster", action="store_true", help="also report unsupervised 2-means agreement")

    p = command("dft-eval", cmd_dft_eval, "Evaluate the spectral detector at video and frame level.")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--frame-stride", type=int, default=1)
    p.add_argument("--report", default=None, help="video-level report path; frame level gets a _frame suffix")
    p.add_argument("--roc", default=None, help="ROC curve path prefix")

    p = command("dft-stats", cmd_dft_stats, "Write per-bin real/fake spectrum mean and std.")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--frame-stride", type=int, default=1)

    p = command("gradcheck", cmd_gradcheck, "Compare analytic and finite-difference gradients.")
    p.add_argument("--all", action="store_true", help="run every case (the default)")
    p.add_argument("--op", action="append", choices=list(CASES), help="case to run; repeatable")
    p.add_argument("--tol", type=float, default=GRADCHECK_TOL)
    p.add_argument("--step", type=float, default=GRADCHECK_STEP)

    p = command("params", cmd_params, "Print the trainable parameter count of an architecture.")
    _add_arch_args(p)

    return parser


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def run(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv``, dispatch, and return the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(e.usage)
        print(f"stfl: error: {e}", file=sys.stderr)
        return ExitCode.USAGE
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)

    _configure_logging(args.verbose)
    try:
        return int(args.func(args, _runtime_from_env()))
    except UsageError as e:
        print(f"stfl {args.command}: error: {e}", file=sys.stderr)
        return ExitCode.USAGE
    except (StflError, OSError) as e:
        logger.debug("%s failed", args.command, exc_info=True)
        print(f"stfl {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return int(exit_code_for(e))


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
