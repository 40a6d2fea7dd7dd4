"""
Y-channel quality metrics: BT.601 luma, PSNR and SSIM.
"""
import math

import numpy as np
from skimage.metrics import structural_similarity

from ..utils.errors import MetricError, ShapeError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 255.0


def rgb_to_y(img: np.ndarray) -> np.ndarray:
    """Studio-swing luma in [16, 235] from a [0, 1] RGB map."""
    if img.ndim != 3 or img.shape[0] != 3:
        raise ShapeError(f"Expected a 3-channel map, got {img.shape}")
    rgb = img.astype(np.float64)
    return 16.0 + 65.481 * rgb[0] + 128.553 * rgb[1] + 24.966 * rgb[2]


def _shave(a: np.ndarray, b: np.ndarray, shave: int):
    if a.shape != b.shape or a.ndim != 2:
        raise ShapeError(f"Expected two equal 2-D maps, got {a.shape} and {b.shape}")
    if shave < 0 or 2 * shave >= min(a.shape):
        raise MetricError(f"Shave of {shave} px leaves nothing of a {a.shape[0]}x{a.shape[1]} map")
    if shave == 0:
        return a.astype(np.float64), b.astype(np.float64)
    return (
        a[shave:-shave, shave:-shave].astype(np.float64),
        b[shave:-shave, shave:-shave].astype(np.float64),
    )


def psnr(a: np.ndarray, b: np.ndarray, shave: int = 0) -> float:
    """PSNR in dB over the shaved crop; identical crops give math.inf."""
    a, b = _shave(a, b, shave)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(DYNAMIC_RANGE ** 2 / mse)

def ssim(a: np.ndarray, b: np.ndarray, shave: int = 0) -> float:
    """Mean SSIM over every fully contained 11x11 Gaussian window (sigma 1.5) of the shaved crop."""
    a, b = _shave(a, b, shave)
    if min(a.shape) < SSIM_WINDOW:
        raise MetricError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {a.shape[0]}x{a.shape[1]}")
    return float(
        structural_similarity(
            a, b,
            win_size=SSIM_WINDOW,
            gaussian_weights=True,
            sigma=SSIM_SIGMA,
            use_sample_covariance=False,
            K1=SSIM_K1,
            K2=SSIM_K2,
            data_range=DYNAMIC_RANGE,
        )
    )
