"""Declarative architecture description."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

from stfl.constants import DEFAULT_CLIP_SHAPES, NUM_CLASSES, RCN_SEQUENCE_LENGTH, Family
from stfl.errors import ConfigurationError

ClipShape = tuple[int, int, int, int]


def parse_family(name: str | Family) -> Family:
    try:
        return Family(name)
    except ValueError:
        known = ", ".join(f.value for f in Family)
        raise ConfigurationError(f"Unknown architecture family '{name}'. Expected one of: {known}") from None


@dataclass(frozen=True)
class ArchSpec:
    """Family, width and input geometry of a detector network.

    ``clip_shape`` is (C, T, H, W); ``None`` selects the family default.
    ``width_multiplier`` scales every channel count (rounded, at least 1);
    1.0 reproduces the full-size networks.
    """

    family: Family
    width_multiplier: float = 1.0
    clip_shape: ClipShape | None = None
    num_classes: int = NUM_CLASSES
    rcn_sequence_length: int = RCN_SEQUENCE_LENGTH

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", parse_family(self.family))
        if not self.width_multiplier > 0:
            raise ConfigurationError(f"width_multiplier must be positive, got {self.width_multiplier}")
        if self.num_classes != NUM_CLASSES:
            raise ConfigurationError(f"num_classes is fixed at {NUM_CLASSES}")
        if self.clip_shape is None:
            shape = DEFAULT_CLIP_SHAPES[self.family]
            if self.family is Family.RCN:
                shape = (shape[0], self.rcn_sequence_length, shape[2], shape[3])
            object.__setattr__(self, "clip_shape", shape)
        else:
            object.__setattr__(self, "clip_shape", tuple(int(v) for v in self.clip_shape))
        if len(self.clip_shape) != 4 or min(self.clip_shape) < 1:  # type: ignore[arg-type]
            raise ConfigurationError(f"clip_shape must be four positive extents, got {self.clip_shape}")
        if self.clip_shape[0] != 3:  # type: ignore[index]
            raise ConfigurationError("clips must have 3 channels")

    @property
    def shape(self) -> ClipShape:
        assert self.clip_shape is not None
        return self.clip_shape

    def width(self, channels: int) -> int:
        """Scaled channel count, rounded half up and never below 1."""
        return max(1, int(math.floor(channels * self.width_multiplier + 0.5)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "family": self.family.value,
            "width_multiplier": self.width_multiplier,
            "clip_shape": list(self.shape),
            "num_classes": self.num_classes,
            "rcn_sequence_length": self.rcn_sequence_length,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ArchSpec:
        try:
            return cls(
                family=parse_family(str(data["family"])),
                width_multiplier=float(data.get("width_multiplier", 1.0)),
                clip_shape=tuple(data["clip_shape"]) if data.get("clip_shape") else None,  # type: ignore[arg-type]
                num_classes=int(data.get("num_classes", NUM_CLASSES)),
                rcn_sequence_length=int(data.get("rcn_sequence_length", RCN_SEQUENCE_LENGTH)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f"Invalid architecture description: {e}") from e
