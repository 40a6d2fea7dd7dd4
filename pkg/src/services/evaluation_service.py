"""
Evaluation service: Y-channel PSNR/SSIM of a checkpoint against a directory
of ground-truth images, with a bicubic baseline and per-image timing.
"""
import time
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from .checkpoint_service import CheckpointService
from .data_pipeline_service import make_lr, modcrop
from .image_io_service import ImageIOService
from ..config.settings import settings
from ..core import bsrn_model
from ..core.metrics import psnr, rgb_to_y, ssim
from ..core.resize import bicubic_resize
from ..models.params import ModelParams
from ..utils.errors import UsageError
from ..utils.logging_utils import setup_logger

# Set up logger for this module
logger = setup_logger("EvaluationService")

REPORT_COLUMNS = [
    "image", "scale", "r", "psnr", "ssim", "bicubic_psnr", "bicubic_ssim", "seconds", "head_evaluations",
]
MEAN_LABEL = "MEAN"


def time_forward(x: np.ndarray, params: ModelParams, scale: int, R: int, r: int, runs: int):
    """Median wall-clock of `runs` forward passes after one warm-up, plus the last result."""
    result = bsrn_model.forward(x, params, scale, R=R, r=r)
    timings = []
    for _ in range(runs):
        start = time.perf_counter()
        result = bsrn_model.forward(x, params, scale, R=R, r=r)
        timings.append(time.perf_counter() - start)
    return float(np.median(timings)), result


def quality(sr: np.ndarray, hr: np.ndarray, shave: int):
    """(psnr, ssim) on the Y channel of clamped images."""
    y_sr = rgb_to_y(np.clip(sr, 0.0, 1.0))
    y_hr = rgb_to_y(np.clip(hr, 0.0, 1.0))
    return psnr(y_sr, y_hr, shave), ssim(y_sr, y_hr, shave)


class EvaluationService:
    """Benchmarks a model over an image directory."""

    def __init__(self, checkpoint_service: CheckpointService = None, io_service: ImageIOService = None):
        self.checkpoint_service = checkpoint_service or CheckpointService()
        self.io_service = io_service or ImageIOService()

    def evaluate(
        self,
        data_dir,
        scale: int,
        checkpoint_path=None,
        freq_controls: Optional[Sequence[int]] = None,
        timing_runs: int = settings.DEFAULT_TIMING_RUNS,
        out_csv=None,
    ) -> pd.DataFrame:
        """One row per (image, r) plus one mean row per r.

        Scale 1 is a debug mode that scores each ground truth against itself
        and needs no checkpoint.
        """
        if timing_runs < 1:
            raise UsageError(f"timing runs must be >= 1, got {timing_runs}")
        files = self.io_service.list_images(data_dir)

        params = None
        R = 1
        rs: List[int] = [1]
        if scale != 1:
            if checkpoint_path is None:
                raise UsageError("A checkpoint is required unless --scale 1")
            ckpt = self.checkpoint_service.load(checkpoint_path)
            ckpt.config.require_scale(scale)
            params = ckpt.params
            R = ckpt.config.R
            rs = list(freq_controls) if freq_controls else [ckpt.config.r]
            for r in rs:
                ckpt.config.with_freq_control(r)

        rows = []
        for path in files:
            hr = self.io_service.load_image(path).to_feature_map()
            if scale == 1:
                rows.append(self._row(path.name, 1, 1, hr, hr, hr, 0.0, 0))
                continue
            hr = modcrop(hr, scale)
            lr = make_lr(hr, scale)
            bicubic = bicubic_resize(lr, hr.shape[1], hr.shape[2])
            for r in rs:
                seconds, result = time_forward(lr, params, scale, R, r, timing_runs)
                rows.append(self._row(path.name, scale, r, result.output, bicubic, hr, seconds, result.head_evaluations))

        report = pd.DataFrame(rows, columns=REPORT_COLUMNS)
        means = []
        for r, group in report.groupby("r", sort=True):
            mean = group[["psnr", "ssim", "bicubic_psnr", "bicubic_ssim", "seconds", "head_evaluations"]].mean()
            means.append({"image": MEAN_LABEL, "scale": scale, "r": r, **mean.to_dict()})
        report = pd.concat([report, pd.DataFrame(means, columns=REPORT_COLUMNS)], ignore_index=True)

        if out_csv is not None:
            Path(out_csv).parent.mkdir(parents=True, exist_ok=True)
            report.to_csv(out_csv, index=False, float_format="%.6f")
            logger.info(f"Wrote evaluation report to {out_csv}")
        return report

    def _row(self, name, scale, r, sr, bicubic, hr, seconds, head_evaluations):
        shave = scale
        sr_psnr, sr_ssim = quality(sr, hr, shave)
        bic_psnr, bic_ssim = quality(bicubic, hr, shave)
        logger.info(
            f"{name} x{scale} r={r}: PSNR {sr_psnr:.3f} dB / SSIM {sr_ssim:.4f} "
            f"(bicubic {bic_psnr:.3f} / {bic_ssim:.4f}) in {seconds * 1000:.1f} ms"
        )
        return {
            "image": name, "scale": scale, "r": r,
            "psnr": sr_psnr, "ssim": sr_ssim,
            "bicubic_psnr": bic_psnr, "bicubic_ssim": bic_ssim,
            "seconds": seconds, "head_evaluations": head_evaluations,
        }
