"""Training loop, optimizer and evaluation metrics."""

from stfl.trainer.evaluate import NetworkScorer, ScoredSplit, evaluate, score_split, summarize
from stfl.trainer.loop import TrainResult, train
from stfl.trainer.metrics import RocCurve, accuracy, roc_auc, roc_curve
from stfl.trainer.optim import Sgd, lr_at_epoch, sgd_step
from stfl.trainer.report import EvalReport, History, HistoryRow

__all__ = [
    "NetworkScorer",
    "ScoredSplit",
    "evaluate",
    "score_split",
    "summarize",
    "TrainResult",
    "train",
    "RocCurve",
    "accuracy",
    "roc_auc",
    "roc_curve",
    "Sgd",
    "lr_at_epoch",
    "sgd_step",
    "EvalReport",
    "History",
    "HistoryRow",
]
