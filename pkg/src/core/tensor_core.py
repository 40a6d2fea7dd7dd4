"""
Forward/backward kernels for the primitive layers of the network.

A feature map is a float32 numpy array of shape (channels, height, width),
stored row-major. Convolution weights are laid out (ky, kx, in, out).
All functions are pure: inputs are never modified.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view

from ..utils.errors import ShapeError

FeatureMap = npt.NDArray[np.float32]

KERNEL_SIZE = 3


@dataclass
class ConvKernel:
    """A 3x3 convolution: weights (3, 3, in_channels, out_channels) and bias (out_channels,)."""
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.weights.ndim != 4 or self.weights.shape[:2] != (KERNEL_SIZE, KERNEL_SIZE):
            raise ShapeError(f"Kernel weights must be (3, 3, in, out), got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[3],):
            raise ShapeError(
                f"Bias shape {self.bias.shape} does not match {self.weights.shape[3]} output channels"
            )

    @property
    def in_channels(self) -> int:
        return self.weights.shape[2]

    @property
    def out_channels(self) -> int:
        return self.weights.shape[3]


def _check_map(x: np.ndarray, what: str = "input"):
    if x.ndim != 3:
        raise ShapeError(f"{what} must be (channels, height, width), got shape {x.shape}")


def _im2col(x: FeatureMap) -> np.ndarray:
    """Rows are output pixels (row-major); columns are (channel, ky, kx)."""
    channels, height, width = x.shape
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)), mode="constant")
    windows = sliding_window_view(padded, (KERNEL_SIZE, KERNEL_SIZE), axis=(1, 2))
    # windows: (C, H, W, ky, kx) -> (H, W, C, ky, kx)
    return np.ascontiguousarray(windows.transpose(1, 2, 0, 3, 4)).reshape(
        height * width, channels * KERNEL_SIZE * KERNEL_SIZE
    )


def _weight_matrix(kernel: ConvKernel) -> np.ndarray:
    # (ky, kx, in, out) -> (in, ky, kx, out) -> (in*9, out); matches _im2col column order
    return np.ascontiguousarray(kernel.weights.transpose(2, 0, 1, 3)).reshape(-1, kernel.out_channels)


def conv2d_forward(x: FeatureMap, kernel: ConvKernel) -> FeatureMap:
    """Same-size 3x3 convolution with zero padding of one pixel."""
    _check_map(x)
    channels, height, width = x.shape
    if channels != kernel.in_channels:
        raise ShapeError(f"Input has {channels} channels, kernel expects {kernel.in_channels}")
    if height == 0 or width == 0:
        raise ShapeError(f"Zero-sized spatial dimensions {height}x{width}")

    cols = _im2col(x)
    out = cols @ _weight_matrix(kernel) + kernel.bias
    return np.ascontiguousarray(out.T).reshape(kernel.out_channels, height, width).astype(x.dtype, copy=False)


def conv2d_backward(
    x: FeatureMap, kernel: ConvKernel, grad_output: FeatureMap, need_input_grad: bool = True
) -> Tuple[Optional[FeatureMap], ConvKernel]:
    """Gradients of a loss with respect to the input, weights and bias of conv2d_forward.

    Returns (grad_input, grad_kernel) where grad_kernel carries weight and bias
    gradients in the same shapes as the kernel. grad_input is None when
    need_input_grad is False.
    """
    _check_map(x)
    _check_map(grad_output, "grad_output")
    channels, height, width = x.shape
    expected = (kernel.out_channels, height, width)
    if channels != kernel.in_channels or grad_output.shape != expected:
        raise ShapeError(f"grad_output shape {grad_output.shape} does not match forward output {expected}")

    grad_rows = np.ascontiguousarray(grad_output.reshape(kernel.out_channels, -1).T)
    cols = _im2col(x)
    grad_w = (cols.T @ grad_rows).reshape(channels, KERNEL_SIZE, KERNEL_SIZE, kernel.out_channels)
    grad_b = grad_output.sum(axis=(1, 2))
    grad_kernel = ConvKernel(
        weights=np.ascontiguousarray(grad_w.transpose(1, 2, 0, 3)).astype(kernel.weights.dtype, copy=False),
        bias=grad_b.astype(kernel.bias.dtype, copy=False),
    )
    if not need_input_grad:
        return None, grad_kernel

    # The input gradient is a same-size convolution of grad_output with the
    # spatially flipped kernel whose in/out channels are swapped.
    flipped = ConvKernel(
        weights=np.ascontiguousarray(kernel.weights[::-1, ::-1].transpose(0, 1, 3, 2)),
        bias=np.zeros(channels, dtype=kernel.weights.dtype),
    )
    grad_input = conv2d_forward(grad_output, flipped)
    return grad_input, grad_kernel


def relu_forward(x: FeatureMap) -> FeatureMap:
    return np.maximum(x, 0).astype(x.dtype, copy=False)


def relu_backward(x: FeatureMap, grad_output: FeatureMap) -> FeatureMap:
    """Gradient passes where x > 0; the subgradient at exactly 0 is 0."""
    if x.shape != grad_output.shape:
        raise ShapeError(f"ReLU input {x.shape} and grad_output {grad_output.shape} differ")
    return np.where(x > 0, grad_output, 0).astype(grad_output.dtype, copy=False)


def concat_channels(a: FeatureMap, b: FeatureMap) -> FeatureMap:
    _check_map(a, "first operand")
    _check_map(b, "second operand")
    if a.shape[1:] != b.shape[1:]:
        raise ShapeError(f"Cannot concatenate maps with spatial sizes {a.shape[1:]} and {b.shape[1:]}")
    return np.concatenate([a, b], axis=0)


def split_channels(x: FeatureMap, first: int) -> Tuple[FeatureMap, FeatureMap]:
    """Split into the leading `first` channels and the rest (possibly empty)."""
    _check_map(x)
    if not 0 <= first <= x.shape[0]:
        raise ShapeError(f"Cannot split {x.shape[0]} channels at {first}")
    return x[:first].copy(), x[first:].copy()


def depth_to_space(x: FeatureMap, factor: int) -> FeatureMap:
    """Sub-pixel rearrangement.

    out[co, y, x] = in[co*f*f + (y % f)*f + (x % f), y // f, x // f]
    """
    _check_map(x)
    channels, height, width = x.shape
    if factor < 1 or channels % (factor * factor) != 0:
        raise ShapeError(f"{channels} channels are not divisible by factor^2 = {factor * factor}")
    out_channels = channels // (factor * factor)
    blocks = x.reshape(out_channels, factor, factor, height, width)
    return np.ascontiguousarray(blocks.transpose(0, 3, 1, 4, 2)).reshape(
        out_channels, height * factor, width * factor
    )


def space_to_depth(x: FeatureMap, factor: int) -> FeatureMap:
    """Inverse permutation of depth_to_space; also its backward pass."""
    _check_map(x)
    channels, height, width = x.shape
    if factor < 1 or height % factor or width % factor:
        raise ShapeError(f"Spatial size {height}x{width} is not divisible by factor {factor}")
    blocks = x.reshape(channels, height // factor, factor, width // factor, factor)
    return np.ascontiguousarray(blocks.transpose(0, 2, 4, 1, 3)).reshape(
        channels * factor * factor, height // factor, width // factor
    )


def add(a: FeatureMap, b: FeatureMap) -> FeatureMap:
    if a.shape != b.shape:
        raise ShapeError(f"Cannot add maps of shapes {a.shape} and {b.shape}")
    return a + b
