"""Differentiable numeric primitives; forward contexts are returned, never hidden."""

from stfl.ops.conv import Conv3DContext, Conv3DSpec, conv3d, conv3d_backward, output_extent
from stfl.ops.dense import linear, linear_backward, relu, relu_backward
from stfl.ops.gradcheck import GradcheckReport, gradcheck, projection, relative_error
from stfl.ops.loss import softmax, weighted_softmax_cross_entropy
from stfl.ops.norm import RunningStats, batchnorm, batchnorm_backward
from stfl.ops.pool import pool3d, pool3d_backward
from stfl.ops.recurrent import GATE_ORDER, LstmSpec, lstm_backward, lstm_sequence

__all__ = [
    "Conv3DContext",
    "Conv3DSpec",
    "conv3d",
    "conv3d_backward",
    "output_extent",
    "linear",
    "linear_backward",
    "relu",
    "relu_backward",
    "GradcheckReport",
    "gradcheck",
    "projection",
    "relative_error",
    "softmax",
    "weighted_softmax_cross_entropy",
    "RunningStats",
    "batchnorm",
    "batchnorm_backward",
    "pool3d",
    "pool3d_backward",
    "GATE_ORDER",
    "LstmSpec",
    "lstm_backward",
    "lstm_sequence",
]
