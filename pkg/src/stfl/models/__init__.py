"""Detector architectures, network construction and checkpoints."""

from stfl.models.arch import ArchSpec, parse_family
from stfl.models.checkpoint import Checkpoint, checkpoint_load, checkpoint_save, read_checkpoint
from stfl.models.inception import inflate_2d_to_3d
from stfl.models.network import Network, build, forward, param_count
from stfl.models.resnet import midplanes

__all__ = [
    "ArchSpec",
    "parse_family",
    "Checkpoint",
    "checkpoint_load",
    "checkpoint_save",
    "read_checkpoint",
    "inflate_2d_to_3d",
    "Network",
    "build",
    "forward",
    "param_count",
    "midplanes",
]
