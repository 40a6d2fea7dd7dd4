"""
Shared fixtures for the BSRN test suite.
"""
import numpy as np
import pytest

from src.core.tensor_core import KERNEL_SIZE, ConvKernel
from src.models.configs import ModelConfig
from src.models.images import ImageRGB8
from src.models.params import init_params
from src.services.image_io_service import ImageIOService


# =============================================================================
# Random generators and tiny models
# =============================================================================

@pytest.fixture
def rng():
    """Seeded generator so every test is reproducible."""
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    return ModelConfig(c=4, s=2, R=4, r=1, scales=(2, 3, 4))


@pytest.fixture
def tiny_params(tiny_config):
    params = init_params(tiny_config, seed=7)
    # Non-zero biases make bias paths observable in oracles
    bias_rng = np.random.default_rng(99)
    for name, tensor in params.items():
        if name.endswith("/bias"):
            tensor[...] = bias_rng.uniform(-0.1, 0.1, size=tensor.shape).astype(np.float32)
    return params


def random_kernel(rng, cin, cout):
    return ConvKernel(
        weights=rng.standard_normal((KERNEL_SIZE, KERNEL_SIZE, cin, cout)).astype(np.float32),
        bias=rng.standard_normal(cout).astype(np.float32),
    )


@pytest.fixture
def make_kernel(rng):
    return lambda cin, cout: random_kernel(rng, cin, cout)


# =============================================================================
# Oracles
# =============================================================================

def conv_loop_reference(x, kernel):
    """Direct six-nested-loop convolution with zero padding, in float64."""
    channels, height, width = x.shape
    out = np.zeros((kernel.out_channels, height, width), dtype=np.float64)
    for o in range(kernel.out_channels):
        for y in range(height):
            for xx in range(width):
                acc = float(kernel.bias[o])
                for i in range(channels):
                    for dy in range(KERNEL_SIZE):
                        for dx in range(KERNEL_SIZE):
                            yy, xs = y + dy - 1, xx + dx - 1
                            if 0 <= yy < height and 0 <= xs < width:
                                acc += float(x[i, yy, xs]) * float(kernel.weights[dy, dx, i, o])
                out[o, y, xx] = acc
    return out


@pytest.fixture
def conv_oracle():
    return conv_loop_reference


# =============================================================================
# Image directories
# =============================================================================

def smooth_image(rng, height, width):
    """A band-limited RGB test picture (sinusoids plus a soft edge) as uint8."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    channels = []
    for _ in range(3):
        fy, fx = rng.uniform(0.05, 0.25, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        wave = 0.5 + 0.3 * np.sin(fy * yy + fx * xx + phase)
        edge = 0.15 * np.tanh((xx - width / 2) / 2.0)
        channels.append(np.clip(wave + edge, 0.0, 1.0))
    return np.rint(np.stack(channels, axis=-1) * 255.0).astype(np.uint8)


def shapes_image(rng, height, width, count=24):
    """Flat-coloured rectangles, discs and stripe patches with hard pixel edges, as uint8."""
    pixels = np.empty((height, width, 3), dtype=np.uint8)
    pixels[...] = rng.integers(0, 256, size=3)
    yy, xx = np.mgrid[0:height, 0:width]
    for _ in range(count):
        color = rng.integers(0, 256, size=3)
        cy, cx = rng.integers(0, height), rng.integers(0, width)
        extent = int(rng.integers(3, max(4, min(height, width) // 4)))
        kind = rng.integers(0, 3)
        if kind == 0:
            mask = (np.abs(yy - cy) <= extent) & (np.abs(xx - cx) <= extent // 2 + 1)
        elif kind == 1:
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= extent ** 2
        else:
            period = int(rng.integers(6, 12))
            mask = (np.abs(yy - cy) <= extent) & (np.abs(xx - cx) <= extent) & ((xx // period) % 2 == 0)
        pixels[mask] = color
    return pixels


@pytest.fixture
def image_dir_factory(tmp_path, rng):
    """Write `count` images of `size` x `size` pixels into a fresh directory.

    `content` is "smooth" (band-limited), "shapes" (hard edges, the kind of
    detail bicubic upscaling blurs) or "noise" (uniform random pixels).
    """
    io = ImageIOService()
    generators = {
        "smooth": smooth_image,
        "shapes": shapes_image,
        "noise": lambda g, h, w: g.integers(0, 256, size=(h, w, 3), dtype=np.uint8),
    }

    def factory(count=2, size=24, name="images", ext=".ppm", content="smooth"):
        directory = tmp_path / name
        directory.mkdir()
        for i in range(count):
            pixels = generators[content](rng, size, size)
            io.save_image(ImageRGB8(pixels), directory / f"img{i:02d}{ext}")
        return directory

    return factory
