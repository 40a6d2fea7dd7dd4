"""
Upscaling service: run a checkpoint on one image and optionally dump the
progressive outputs and channel-averaged H_t / S_t maps.
"""
from pathlib import Path
from typing import Optional

import numpy as np

from .checkpoint_service import CheckpointService
from .image_io_service import ImageIOService
from ..core import bsrn_model
from ..core.metrics import psnr, rgb_to_y
from ..models.images import ImageRGB8
from ..utils.errors import ShapeError
from ..utils.logging_utils import setup_logger

# Set up logger for this module
logger = setup_logger("UpscaleService")


def normalize_map(m: np.ndarray) -> np.ndarray:
    """Min-max normalise a 2-D map to [0, 1]; a flat map becomes zeros."""
    lo, hi = float(m.min()), float(m.max())
    if hi <= lo:
        return np.zeros_like(m, dtype=np.float32)
    return ((m - lo) / (hi - lo)).astype(np.float32)


class UpscaleService:
    """Applies a trained model to single images."""

    def __init__(self, checkpoint_service: CheckpointService = None, io_service: ImageIOService = None):
        self.checkpoint_service = checkpoint_service or CheckpointService()
        self.io_service = io_service or ImageIOService()

    def upscale(
        self,
        checkpoint_path,
        input_path,
        output_path,
        scale: int,
        freq_control: Optional[int] = None,
        emit_dir=None,
        reference_path=None,
    ) -> bsrn_model.ForwardResult:
        ckpt = self.checkpoint_service.load(checkpoint_path)
        config = ckpt.config
        config.require_scale(scale)
        r = config.r if freq_control is None else freq_control
        if freq_control is not None:
            config.with_freq_control(r)  # validates r against R

        x = self.io_service.load_image(input_path).to_feature_map()
        result = bsrn_model.forward(x, ckpt.params, scale, R=config.R, r=r, emit_intermediate=emit_dir is not None)
        logger.info(f"Upscaled {input_path} x{scale} with R={config.R}, r={r}: {result.head_evaluations} head evaluation(s)")
        self.io_service.save_image(ImageRGB8.from_feature_map(result.output), output_path)

        if emit_dir is not None:
            self.write_intermediates(result, Path(emit_dir), reference_path)
        return result

    def write_intermediates(self, result: bsrn_model.ForwardResult, emit_dir: Path, reference_path=None):
        emit_dir.mkdir(parents=True, exist_ok=True)
        reference_y = None
        if reference_path is not None:
            reference = self.io_service.load_image(reference_path).to_feature_map()
            if reference.shape != result.output.shape:
                raise ShapeError(f"Reference {reference.shape} does not match output {result.output.shape}")
            reference_y = rgb_to_y(reference)

        for t, image in result.intermediates:
            self.io_service.save_image(ImageRGB8.from_feature_map(image), emit_dir / f"sr_t{t:03d}.ppm")
            if reference_y is not None:
                value = psnr(rgb_to_y(np.clip(image, 0.0, 1.0)), reference_y)
                logger.info(f"t={t}: PSNR {value:.3f} dB")
        for t, h_mean in enumerate(result.h_means, start=1):
            self.io_service.save_image(ImageRGB8.from_gray(normalize_map(h_mean)), emit_dir / f"h_t{t:03d}.ppm")
        for t, s_mean in enumerate(result.s_means, start=1):
            self.io_service.save_image(ImageRGB8.from_gray(normalize_map(s_mean)), emit_dir / f"s_t{t:03d}.ppm")
        logger.info(
            f"Wrote {len(result.intermediates)} progressive output(s), {len(result.h_means)} H map(s) "
            f"and {len(result.s_means)} S map(s) to {emit_dir}"
        )
