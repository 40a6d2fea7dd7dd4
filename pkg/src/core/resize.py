"""
Separable bicubic resampling (cubic convolution, a = -0.5).

Destination pixel i samples the source at (i + 0.5) * in / out - 0.5 with
edge-clamped taps. No antialiasing prefilter is applied when shrinking.
"""
import numpy as np

from ..utils.errors import ShapeError

CUBIC_A = -0.5


def cubic_weight(x):
    """Keys cubic convolution kernel with a = -0.5 (Catmull-Rom)."""
    ax = np.abs(x)
    a = CUBIC_A
    near = ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0
    far = ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a
    return np.where(ax <= 1.0, near, np.where(ax < 2.0, far, 0.0))


def resize_matrix(in_size: int, out_size: int) -> np.ndarray:
    """(out_size, in_size) float64 matrix whose rows are the 4-tap weights of each output sample."""
    scale = in_size / out_size
    dst = np.arange(out_size, dtype=np.float64)
    src = (dst + 0.5) * scale - 0.5
    base = np.floor(src).astype(np.int64)
    matrix = np.zeros((out_size, in_size), dtype=np.float64)
    rows = np.arange(out_size)
    for tap in (-1, 0, 1, 2):
        idx = base + tap
        weights = cubic_weight(src - idx)
        # Clamped taps fold onto the border sample
        np.add.at(matrix, (rows, np.clip(idx, 0, in_size - 1)), weights)
    return matrix


def bicubic_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize a (channels, h, w) map to (channels, out_h, out_w)."""
    if img.ndim != 3:
        raise ShapeError(f"Expected a (channels, height, width) map, got {img.shape}")
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"Output size must be at least 1x1, got {out_h}x{out_w}")
    _, in_h, in_w = img.shape
    rows = resize_matrix(in_h, out_h)
    cols = resize_matrix(in_w, out_w)
    out = np.einsum("yh,chw,xw->cyx", rows, img.astype(np.float64), cols, optimize=True)
    return out.astype(np.float32)
