"""
Training data: bicubic LR synthesis, LR-grid aligned patch sampling,
dihedral augmentation and per-step scale sampling.
"""
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .image_io_service import ImageIOService, PathLike
from ..core.resize import bicubic_resize
from ..models.images import PatchPair, TrainingImage
from ..utils.errors import ConfigError, SamplingError, ShapeError, UsageError
from ..utils.logging_utils import setup_logger

# Set up logger for this module
logger = setup_logger("DataPipelineService")

DIHEDRAL_COUNT = 8


def step_rng(seed: int, step: int) -> np.random.Generator:
    """Independent generator for one training step, derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(step,)))


def modcrop(hr: np.ndarray, scale: int) -> np.ndarray:
    """Trim the bottom/right edges so both dims are multiples of scale."""
    _, h, w = hr.shape
    return hr[:, : h - h % scale, : w - w % scale]


def make_lr(hr: np.ndarray, scale: int) -> np.ndarray:
    """Bicubic downsample of a modcropped HR map, clipped to [0, 1]."""
    _, h, w = hr.shape
    if h % scale or w % scale:
        raise ShapeError(f"HR size {h}x{w} is not a multiple of x{scale}; modcrop first")
    return np.clip(bicubic_resize(hr, h // scale, w // scale), 0.0, 1.0)


def sample_patch(image: TrainingImage, scale: int, patch_size: int, rng: np.random.Generator) -> PatchPair:
    """Crop an LR patch at an LR-grid position and the HR patch at exactly scale times that offset."""
    lr_full = image.lr[scale]
    _, lh, lw = lr_full.shape
    if lh < patch_size or lw < patch_size:
        raise SamplingError(
            f"LR image {lw}x{lh} at x{scale} is smaller than the {patch_size}x{patch_size} patch",
            image.name,
        )
    y0 = int(rng.integers(0, lh - patch_size + 1))
    x0 = int(rng.integers(0, lw - patch_size + 1))
    hp = scale * patch_size
    lr = lr_full[:, y0:y0 + patch_size, x0:x0 + patch_size].copy()
    hr = image.hr[:, scale * y0:scale * y0 + hp, scale * x0:scale * x0 + hp].copy()
    return PatchPair(lr=lr, hr=hr, scale=scale)


def dihedral(x: np.ndarray, k: int) -> np.ndarray:
    """Element k of the dihedral group of the square: k % 4 quarter turns, mirrored when k >= 4."""
    out = np.rot90(x, k % 4, axes=(1, 2))
    if k >= 4:
        out = out[:, :, ::-1]
    return np.ascontiguousarray(out)


def augment(pair: PatchPair, rng: np.random.Generator) -> PatchPair:
    """Apply one uniformly chosen dihedral transform to both patches."""
    for name, patch in (("lr", pair.lr), ("hr", pair.hr)):
        if patch.shape[1] != patch.shape[2]:
            raise ShapeError(f"{name} patch {patch.shape[1]}x{patch.shape[2]} is not square")
    k = int(rng.integers(0, DIHEDRAL_COUNT))
    return PatchPair(lr=dihedral(pair.lr, k), hr=dihedral(pair.hr, k), scale=pair.scale)


def sample_scale(rng: np.random.Generator, scales: Sequence[int]) -> int:
    if not scales:
        raise ConfigError("scales must be non-empty")
    return int(scales[int(rng.integers(0, len(scales)))])


class DataPipelineService:
    """Holds the training corpus in memory and draws batches from it."""

    def __init__(self, io_service: ImageIOService = None):
        self.io_service = io_service or ImageIOService()
        self.images: List[TrainingImage] = []

    def load_directory(self, directory: PathLike, scales: Sequence[int], patch_size: int) -> List[TrainingImage]:
        """Load every image (lexicographic order) and precompute its LR versions.

        Fails before training starts when any image is too small for the patch.
        """
        files = self.io_service.list_images(directory)
        images = []
        for path in files:
            images.append(self.build_training_image(path, scales, patch_size))
        self.images = images
        logger.info(f"Loaded {len(images)} training image(s) for scales {list(scales)}")
        return images

    def build_training_image(self, path: PathLike, scales: Sequence[int], patch_size: int) -> TrainingImage:
        path = Path(path)
        hr = self.io_service.load_image(path).to_feature_map()
        image = TrainingImage(name=path.name, hr=hr)
        for scale in scales:
            cropped = modcrop(hr, scale)
            lr = make_lr(cropped, scale)
            if min(lr.shape[1:]) < patch_size:
                raise SamplingError(
                    f"LR image {lr.shape[2]}x{lr.shape[1]} at x{scale} is smaller than the "
                    f"{patch_size}x{patch_size} patch",
                    path.name,
                )
            image.lr[scale] = lr
        logger.debug(f"Prepared {path.name}: HR {hr.shape[2]}x{hr.shape[1]}")
        return image

    def sample_batch(
        self, rng: np.random.Generator, scales: Sequence[int], batch: int, patch_size: int
    ) -> Tuple[int, List[PatchPair]]:
        """One scale for the whole step, then `batch` random (image, position, transform) draws."""
        if not self.images:
            raise UsageError("No training images loaded")
        scale = sample_scale(rng, scales)
        pairs = []
        for _ in range(batch):
            image = self.images[int(rng.integers(0, len(self.images)))]
            pairs.append(augment(sample_patch(image, scale, patch_size, rng), rng))
        return scale, pairs
