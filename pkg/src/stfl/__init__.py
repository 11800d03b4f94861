"""stfl: spatiotemporal convolutional networks for deepfake video detection.

Five clip-level detectors (R3D, MC3, R(2+1)D, I3D and a recurrent
convolutional network) built on a NumPy autograd core, plus a frame-level
spectral baseline.
"""

__version__ = "0.1.0"

from stfl.config import RuntimeConfig, TrainConfig
from stfl.constants import ExitCode, Family
from stfl.errors import (
    ConfigurationError,
    DataError,
    DimensionError,
    FormatError,
    NumericError,
    StateError,
    StateMismatchError,
    StflError,
    UsageError,
    exit_code_for,
)
from stfl.models import ArchSpec, Network, build, checkpoint_load, checkpoint_save, param_count
from stfl.scoring import ClipScorer
from stfl.tensor import Tensor

__all__ = [
    "RuntimeConfig",
    "TrainConfig",
    "ExitCode",
    "Family",
    "ConfigurationError",
    "DataError",
    "DimensionError",
    "FormatError",
    "NumericError",
    "StateError",
    "StateMismatchError",
    "StflError",
    "UsageError",
    "exit_code_for",
    "ArchSpec",
    "Network",
    "build",
    "checkpoint_load",
    "checkpoint_save",
    "param_count",
    "ClipScorer",
    "Tensor",
]
