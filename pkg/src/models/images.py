"""
Image data models: 8-bit RGB images, aligned LR/HR training pairs and dataset entries.
"""
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ..utils.errors import ShapeError


@dataclass
class ImageRGB8:
    """An 8-bit RGB image stored as a (height, width, 3) uint8 array."""
    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.dtype != np.uint8 or self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ShapeError(f"Expected (h, w, 3) uint8 pixels, got {self.pixels.dtype} {self.pixels.shape}")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise ShapeError(f"Image must be at least 1x1, got {self.pixels.shape[:2]}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def to_feature_map(self) -> np.ndarray:
        """(3, h, w) float32 map with values in [0, 1]."""
        return (self.pixels.transpose(2, 0, 1).astype(np.float32) / np.float32(255.0))

    @classmethod
    def from_feature_map(cls, x: np.ndarray) -> "ImageRGB8":
        """Clamp to [0, 1] and round to 8 bits."""
        if x.ndim != 3 or x.shape[0] != 3:
            raise ShapeError(f"Expected a 3-channel map, got {x.shape}")
        scaled = np.rint(np.clip(x, 0.0, 1.0) * 255.0).astype(np.uint8)
        return cls(np.ascontiguousarray(scaled.transpose(1, 2, 0)))

    @classmethod
    def from_gray(cls, g: np.ndarray) -> "ImageRGB8":
        """Replicate a single-channel [0, 1] map into a gray RGB image."""
        level = np.rint(np.clip(g, 0.0, 1.0) * 255.0).astype(np.uint8)
        return cls(np.ascontiguousarray(np.stack([level] * 3, axis=-1)))


@dataclass
class PatchPair:
    """Aligned low/high resolution patches; hr is exactly `scale` times lr."""
    lr: np.ndarray
    hr: np.ndarray
    scale: int

    def __post_init__(self):
        if self.hr.shape != (self.lr.shape[0], self.lr.shape[1] * self.scale, self.lr.shape[2] * self.scale):
            raise ShapeError(f"HR {self.hr.shape} is not x{self.scale} of LR {self.lr.shape}")


@dataclass
class TrainingImage:
    """A dataset entry: the modcropped HR map and its bicubic LR versions per scale."""
    name: str
    hr: np.ndarray
    lr: Dict[int, np.ndarray] = field(default_factory=dict)
