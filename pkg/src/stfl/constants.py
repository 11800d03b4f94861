"""Constants for stfl: exit codes, architecture families, file formats, numeric defaults."""

from enum import Enum, IntEnum


class ExitCode(IntEnum):
    """Process exit codes of the command-line surface."""

    OK = 0
    USAGE = 1
    DATA = 2
    NUMERIC = 3


class Family(str, Enum):
    """Video-level detector architectures."""

    R3D = "r3d"
    MC3 = "mc3"
    R2PLUS1D = "r2plus1d"
    I3D = "i3d"
    RCN = "rcn"


# Binary containers (all integers little-endian)
CKPT_MAGIC = b"STFL"
CKPT_VERSION = 1
CLIP_MAGIC = b"CLPT"
CLIP_VERSION = 1

NUM_CLASSES = 2
LABEL_NAMES = ("real", "fake")  # index == class id
SPLITS = ("train", "test")

DEFAULT_CLIP_SHAPES: dict[Family, tuple[int, int, int, int]] = {
    Family.R3D: (3, 16, 112, 112),
    Family.MC3: (3, 16, 112, 112),
    Family.R2PLUS1D: (3, 16, 112, 112),
    Family.I3D: (3, 16, 224, 224),
    Family.RCN: (3, 10, 112, 112),
}
RCN_SEQUENCE_LENGTH = 10

# Short side is resized to crop * 8/7 before cropping (256 -> 224, 128 -> 112)
PRECROP_RATIO = 8 / 7

FACE_CROP_SIZE = 256

BN_EPS = 1e-5
BN_MOMENTUM = 0.1

SPECTRUM_BINS = 300
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

GRADCHECK_STEP = 1e-5
GRADCHECK_TOL = 1e-4
GRADCHECK_MAX_COORDS = 200

REPORT_DECIMALS = 4
ACCURACY_THRESHOLD = 0.5
