"""
Learnable parameters of the network, addressed by stable names.

Names:
    init                      3 -> c feature extractor
    rrb/0, rrb/1, rrb/2       (c+s) -> (c+s), shared by every recursion
    head/x{f}/stage{k}        c -> stage^2 * c expansion convs of the x{f} head
    head/x{f}/out             c -> 3 reconstruction conv of the x{f} head

Each kernel owns two tensors, "<name>/weight" and "<name>/bias".
"""
from collections import OrderedDict
from typing import Dict, Iterator, List, Tuple

import numpy as np

from .configs import ModelConfig
from ..core.tensor_core import ConvKernel, KERNEL_SIZE
from ..utils.errors import ConfigError, ShapeError

RRB_CONV_COUNT = 3


def head_stages(scale: int) -> List[int]:
    """Depth-to-space factors of a scale's head; x4 is two unshared x2 stages."""
    if scale == 2:
        return [2]
    if scale == 3:
        return [3]
    if scale == 4:
        return [2, 2]
    raise ConfigError(f"Unsupported scale x{scale}")


def kernel_shapes(config: ModelConfig) -> "OrderedDict[str, Tuple[int, int]]":
    """Ordered (in_channels, out_channels) of every kernel the config owns."""
    c, s = config.c, config.s
    shapes = OrderedDict()
    shapes["init"] = (3, c)
    for i in range(RRB_CONV_COUNT):
        shapes[f"rrb/{i}"] = (c + s, c + s)
    for scale in config.scales:
        for k, factor in enumerate(head_stages(scale)):
            shapes[f"head/x{scale}/stage{k}"] = (c, factor * factor * c)
        shapes[f"head/x{scale}/out"] = (c, 3)
    return shapes


def tensor_shapes(config: ModelConfig) -> "OrderedDict[str, Tuple[int, ...]]":
    shapes = OrderedDict()
    for name, (cin, cout) in kernel_shapes(config).items():
        shapes[f"{name}/weight"] = (KERNEL_SIZE, KERNEL_SIZE, cin, cout)
        shapes[f"{name}/bias"] = (cout,)
    return shapes


def _kernel_size(cin: int, cout: int) -> int:
    return KERNEL_SIZE * KERNEL_SIZE * cin * cout + cout


def count_params(config: ModelConfig, scale: int) -> int:
    """Learnable scalars on the path used for `scale`: shared body plus that scale's head."""
    config.require_scale(scale)
    total = 0
    for name, (cin, cout) in kernel_shapes(config).items():
        if name.startswith("head/") and not name.startswith(f"head/x{scale}/"):
            continue
        total += _kernel_size(cin, cout)
    return total


def count_all_params(config: ModelConfig) -> int:
    return sum(_kernel_size(cin, cout) for cin, cout in kernel_shapes(config).values())


class ModelParams:
    """Named float32 tensors backing every kernel of the model.

    Kernels returned by `kernel()` are views over the stored tensors, so the
    shared RRB weights exist exactly once however many recursions use them.
    """

    def __init__(self, config: ModelConfig, tensors: Dict[str, np.ndarray]):
        expected = tensor_shapes(config)
        missing = [n for n in expected if n not in tensors]
        extra = [n for n in tensors if n not in expected]
        if missing or extra:
            raise ShapeError(f"Parameter names mismatch: missing={missing} unexpected={extra}")
        for name, shape in expected.items():
            if tuple(tensors[name].shape) != shape:
                raise ShapeError(f"{name} has shape {tuple(tensors[name].shape)}, expected {shape}")
        self.config = config
        self.tensors: "OrderedDict[str, np.ndarray]" = OrderedDict(
            (name, np.ascontiguousarray(tensors[name], dtype=np.float32)) for name in expected
        )

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def items(self):
        return self.tensors.items()

    def values(self):
        return self.tensors.values()

    def kernel(self, name: str) -> ConvKernel:
        return ConvKernel(weights=self.tensors[f"{name}/weight"], bias=self.tensors[f"{name}/bias"])

    def rrb_kernels(self) -> Tuple[ConvKernel, ...]:
        return tuple(self.kernel(f"rrb/{i}") for i in range(RRB_CONV_COUNT))

    def head_kernels(self, scale: int) -> Tuple[List[ConvKernel], ConvKernel]:
        self.config.require_scale(scale)
        stages = [self.kernel(f"head/x{scale}/stage{k}") for k in range(len(head_stages(scale)))]
        return stages, self.kernel(f"head/x{scale}/out")

    def num_scalars(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {n: t.copy() for n, t in self.tensors.items()})


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """Fan-in scaled uniform weights in +-sqrt(6 / (9 * in_channels)), zero biases.

    Tensors are drawn in name order from one generator, so the same seed
    always yields bitwise-identical parameters.
    """
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, (cin, cout) in kernel_shapes(config).items():
        limit = np.sqrt(6.0 / (KERNEL_SIZE * KERNEL_SIZE * cin))
        shape = (KERNEL_SIZE, KERNEL_SIZE, cin, cout)
        tensors[f"{name}/weight"] = rng.uniform(-limit, limit, size=shape).astype(np.float32)
        tensors[f"{name}/bias"] = np.zeros(cout, dtype=np.float32)
    return ModelParams(config, tensors)
