"""Dataset ingestion: manifests, clip files, sampling and synthetic data."""

from stfl.data.clipfile import decode_clip, encode_clip, read_clip, write_clip
from stfl.data.frames import read_frames
from stfl.data.loader import Batch, ClipCache, ClipLoader
from stfl.data.manifest import ClipRecord, Manifest, class_weights, load_manifest, parse_manifest
from stfl.data.synth import SynthConfig, synth_dataset
from stfl.data.transforms import (
    ClipWindow,
    channel_stats,
    crop_faces,
    denormalize,
    eval_starts,
    load_boxes,
    normalize,
    resize_bilinear,
    sample_clip,
)

__all__ = [
    "decode_clip",
    "encode_clip",
    "read_clip",
    "write_clip",
    "read_frames",
    "Batch",
    "ClipCache",
    "ClipLoader",
    "ClipRecord",
    "Manifest",
    "class_weights",
    "load_manifest",
    "parse_manifest",
    "SynthConfig",
    "synth_dataset",
    "ClipWindow",
    "channel_stats",
    "crop_faces",
    "denormalize",
    "eval_starts",
    "load_boxes",
    "normalize",
    "resize_bilinear",
    "sample_clip",
]
