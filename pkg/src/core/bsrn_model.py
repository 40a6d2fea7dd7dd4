"""
The block state-based recursive network.

Pipeline: initial 3x3 conv -> recursive residual block (RRB) applied R times
with one shared set of weights while threading a zero-initialised block
state S next to the features H -> per-scale depth-to-space head applied to
H_{r*t} for t = 1..R/r -> exponentially weighted combination of those outputs.

Every forward function has a `_tape` companion that also returns what the
backward pass needs; backward functions accumulate into a dict of named
gradients so a shared kernel collects the sum of its per-use contributions.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .tensor_core import (
    ConvKernel,
    FeatureMap,
    add,
    concat_channels,
    conv2d_backward,
    conv2d_forward,
    depth_to_space,
    relu_backward,
    relu_forward,
    space_to_depth,
    split_channels,
)
from ..models.configs import check_freq_control
from ..models.params import ModelParams, RRB_CONV_COUNT, head_stages
from ..models.state import RecursionState
from ..utils.errors import ConfigError, ShapeError

Grads = Dict[str, np.ndarray]


def _accumulate(grads: Grads, name: str, grad_kernel: ConvKernel):
    for suffix, value in (("weight", grad_kernel.weights), ("bias", grad_kernel.bias)):
        key = f"{name}/{suffix}"
        if key in grads:
            grads[key] += value
        else:
            grads[key] = value.copy()


# ---------------------------------------------------------------------------
# Initial feature extraction
# ---------------------------------------------------------------------------

def extract_features(x: FeatureMap, params: ModelParams) -> RecursionState:
    """H_0 = conv(x, init); S_0 = zeros with s channels."""
    if x.ndim != 3 or x.shape[0] != 3:
        raise ShapeError(f"Input image must have exactly 3 channels, got shape {x.shape}")
    h0 = conv2d_forward(x, params.kernel("init"))
    s0 = np.zeros((params.config.s,) + x.shape[1:], dtype=np.float32)
    return RecursionState(H=h0, S=s0)


# ---------------------------------------------------------------------------
# Recursive residual block
# ---------------------------------------------------------------------------

@dataclass
class RRBCache:
    state_in: RecursionState
    x1: FeatureMap
    y1: FeatureMap
    z2: FeatureMap
    x3: FeatureMap


def _c_conv(h: FeatureMap, s: FeatureMap, kernel: ConvKernel):
    x = concat_channels(h, s)
    y = conv2d_forward(x, kernel)
    return x, y


def rrb_forward(state: RecursionState, kernels: Sequence[ConvKernel]) -> Tuple[RecursionState, RRBCache]:
    """One RRB iteration with explicit kernels.

    CConv1 -> CReLU -> CConv2 -> +H (H part only) -> CConv3 -> +H (H part only).
    """
    c = state.H.shape[0]
    s = state.S.shape[0]
    expected = c + s
    for k in kernels:
        if k.in_channels != expected or k.out_channels != expected:
            raise ShapeError(f"RRB kernel is {k.in_channels}->{k.out_channels}, state needs {expected}->{expected}")

    x1, y1 = _c_conv(state.H, state.S, kernels[0])
    z2 = relu_forward(y1)
    h2, s2 = split_channels(z2, c)
    _, y2 = _c_conv(h2, s2, kernels[1])
    h3, s3 = split_channels(y2, c)
    h3 = add(h3, state.H)
    x3, y3 = _c_conv(h3, s3, kernels[2])
    h4, s4 = split_channels(y3, c)
    h4 = add(h4, state.H)
    return RecursionState(H=h4, S=s4), RRBCache(state_in=state, x1=x1, y1=y1, z2=z2, x3=x3)


def rrb_backward(
    cache: RRBCache,
    kernels: Sequence[ConvKernel],
    grad_h: FeatureMap,
    grad_s: FeatureMap,
) -> Tuple[FeatureMap, FeatureMap, List[ConvKernel]]:
    """Gradients w.r.t. the block input (H_t, S_t) and the three kernels."""
    c = cache.state_in.H.shape[0]
    # Both residuals carry the output H gradient straight to the block input
    grad_h_in = grad_h.copy()

    grad_y3 = concat_channels(grad_h, grad_s)
    grad_x3, grad_k3 = conv2d_backward(cache.x3, kernels[2], grad_y3)
    grad_h3, _ = split_channels(grad_x3, c)
    grad_h_in += grad_h3

    # x3 = y2 + [H, 0], so grad_y2 == grad_x3
    grad_z2, grad_k2 = conv2d_backward(cache.z2, kernels[1], grad_x3)
    grad_y1 = relu_backward(cache.y1, grad_z2)
    grad_x1, grad_k1 = conv2d_backward(cache.x1, kernels[0], grad_y1)
    grad_h0, grad_s0 = split_channels(grad_x1, c)
    grad_h_in += grad_h0
    return grad_h_in, grad_s0, [grad_k1, grad_k2, grad_k3]


def rrb_step(state: RecursionState, params: ModelParams) -> RecursionState:
    config = params.config
    if state.H.shape[0] != config.c or state.S.shape[0] != config.s:
        raise ShapeError(
            f"State has c={state.H.shape[0]}, s={state.S.shape[0]}; model expects c={config.c}, s={config.s}"
        )
    new_state, _ = rrb_forward(state, params.rrb_kernels())
    return new_state


def run_recursion(state0: RecursionState, params: ModelParams, R: int) -> List[RecursionState]:
    """States for t = 1..R; every iteration uses the same RRB kernels."""
    if R < 1:
        raise ConfigError(f"R must be >= 1, got {R}")
    states = []
    state = state0
    for _ in range(R):
        state = rrb_step(state, params)
        states.append(state)
    return states


# ---------------------------------------------------------------------------
# Upscaling head
# ---------------------------------------------------------------------------

@dataclass
class HeadCache:
    stage_inputs: List[FeatureMap]
    final_input: FeatureMap


def head_forward_tape(h: FeatureMap, params: ModelParams, scale: int) -> Tuple[FeatureMap, HeadCache]:
    stages, out_kernel = params.head_kernels(scale)
    stage_inputs = []
    current = h
    for kernel, factor in zip(stages, head_stages(scale)):
        stage_inputs.append(current)
        current = depth_to_space(conv2d_forward(current, kernel), factor)
    image = conv2d_forward(current, out_kernel)
    return image, HeadCache(stage_inputs=stage_inputs, final_input=current)


def head_backward(cache: HeadCache, params: ModelParams, scale: int, grad_image: FeatureMap, grads: Grads) -> FeatureMap:
    stages, out_kernel = params.head_kernels(scale)
    grad, grad_kernel = conv2d_backward(cache.final_input, out_kernel, grad_image)
    _accumulate(grads, f"head/x{scale}/out", grad_kernel)
    factors = head_stages(scale)
    for k in reversed(range(len(stages))):
        grad = space_to_depth(grad, factors[k])
        grad, grad_kernel = conv2d_backward(cache.stage_inputs[k], stages[k], grad)
        _accumulate(grads, f"head/x{scale}/stage{k}", grad_kernel)
    return grad


def upscale_head(h: FeatureMap, params: ModelParams, scale: int) -> FeatureMap:
    """Map c-channel features to a 3-channel image `scale` times larger. S is never used here."""
    params.config.require_scale(scale)
    if h.ndim != 3 or h.shape[0] != params.config.c:
        raise ShapeError(f"Head expects {params.config.c}-channel features, got shape {h.shape}")
    image, _ = head_forward_tape(h, params, scale)
    return image


# ---------------------------------------------------------------------------
# Progressive combination
# ---------------------------------------------------------------------------

def combination_weights(R: int, r: int) -> np.ndarray:
    """Normalised float64 weights 2^(r*t - 1) / sum, t = 1..R/r."""
    check_freq_control(R, r)
    raw = np.array([2.0 ** (r * t - 1) for t in range(1, R // r + 1)], dtype=np.float64)
    return raw / raw.sum()


def combine_outputs(intermediates: Sequence[FeatureMap], r: int, R: int) -> FeatureMap:
    if len(intermediates) == 0:
        raise ConfigError("Cannot combine an empty sequence of outputs")
    weights = combination_weights(R, r)
    if len(intermediates) != len(weights):
        raise ConfigError(f"Expected R/r = {len(weights)} outputs, got {len(intermediates)}")
    shape = intermediates[0].shape
    combined = np.zeros(shape, dtype=np.float64)
    for weight, image in zip(weights, intermediates):
        if image.shape != shape:
            raise ShapeError(f"Intermediate outputs differ in shape: {image.shape} vs {shape}")
        combined += weight * image.astype(np.float64)
    return combined.astype(np.float32)


# ---------------------------------------------------------------------------
# Full forward / backward
# ---------------------------------------------------------------------------

@dataclass
class ForwardResult:
    """Combined output plus optional progressive dumps.

    intermediates: (t, Y_t) for every t that feeds the combination.
    h_means / s_means: channel-averaged H_t / S_t for t = 1..R (s_means empty when s = 0).
    """
    output: FeatureMap
    head_evaluations: int
    intermediates: List[Tuple[int, FeatureMap]] = field(default_factory=list)
    h_means: List[np.ndarray] = field(default_factory=list)
    s_means: List[np.ndarray] = field(default_factory=list)


@dataclass
class ForwardTape:
    scale: int
    R: int
    r: int
    x: FeatureMap
    rrb_caches: List[RRBCache]
    head_caches: Dict[int, HeadCache]
    output: FeatureMap


def _check_run(params: ModelParams, x: FeatureMap, scale: int, R: int, r: int):
    params.config.require_scale(scale)
    if R < 1:
        raise ConfigError(f"R must be >= 1, got {R}")
    check_freq_control(R, r)
    if x.ndim != 3 or x.shape[0] != 3:
        raise ShapeError(f"Input image must have exactly 3 channels, got shape {x.shape}")


def forward(
    x: FeatureMap,
    params: ModelParams,
    scale: int,
    R: Optional[int] = None,
    r: Optional[int] = None,
    emit_intermediate: bool = False,
) -> ForwardResult:
    """Upscale one image; R and r default to the model's configuration."""
    R = params.config.R if R is None else R
    r = params.config.r if r is None else r
    _check_run(params, x, scale, R, r)

    state = extract_features(x, params)
    states = run_recursion(state, params, R)
    outputs = []
    for t in range(r, R + 1, r):
        outputs.append((t, upscale_head(states[t - 1].H, params, scale)))
    combined = combine_outputs([image for _, image in outputs], r, R)

    result = ForwardResult(output=combined, head_evaluations=len(outputs))
    if emit_intermediate:
        result.intermediates = outputs
        result.h_means = [st.H.mean(axis=0) for st in states]
        if params.config.s > 0:
            result.s_means = [st.S.mean(axis=0) for st in states]
    return result


def forward_tape(
    x: FeatureMap, params: ModelParams, scale: int, R: Optional[int] = None, r: Optional[int] = None
) -> ForwardTape:
    """Forward pass that keeps every activation needed by `backward`."""
    R = params.config.R if R is None else R
    r = params.config.r if r is None else r
    _check_run(params, x, scale, R, r)

    state = extract_features(x, params)
    kernels = params.rrb_kernels()
    rrb_caches = []
    head_caches = {}
    outputs = []
    for t in range(1, R + 1):
        state, cache = rrb_forward(state, kernels)
        rrb_caches.append(cache)
        if t % r == 0:
            image, head_cache = head_forward_tape(state.H, params, scale)
            head_caches[t] = head_cache
            outputs.append(image)
    combined = combine_outputs(outputs, r, R)
    return ForwardTape(
        scale=scale, R=R, r=r, x=x, rrb_caches=rrb_caches, head_caches=head_caches, output=combined
    )


def backward(tape: ForwardTape, params: ModelParams, grad_output: FeatureMap) -> Grads:
    """Gradients of every parameter on the scale's path given dL/dY.

    Tensors off the path (other scales' heads) are absent from the result.
    """
    if grad_output.shape != tape.output.shape:
        raise ShapeError(f"grad_output {grad_output.shape} does not match output {tape.output.shape}")
    grads: Grads = {}
    weights = combination_weights(tape.R, tape.r)
    config = params.config
    kernels = params.rrb_kernels()

    # dL/dH_t contributed by the heads
    grad_h_from_heads: Dict[int, FeatureMap] = {}
    for weight, t in zip(weights, range(tape.r, tape.R + 1, tape.r)):
        grad_image = (weight * grad_output.astype(np.float64)).astype(np.float32)
        grad_h_from_heads[t] = head_backward(tape.head_caches[t], params, tape.scale, grad_image, grads)

    spatial = tape.x.shape[1:]
    grad_h = np.zeros((config.c,) + spatial, dtype=np.float32)
    grad_s = np.zeros((config.s,) + spatial, dtype=np.float32)
    for t in range(tape.R, 0, -1):
        if t in grad_h_from_heads:
            grad_h = grad_h + grad_h_from_heads[t]
        grad_h, grad_s, kernel_grads = rrb_backward(tape.rrb_caches[t - 1], kernels, grad_h, grad_s)
        for i in range(RRB_CONV_COUNT):
            _accumulate(grads, f"rrb/{i}", kernel_grads[i])

    _, grad_kernel = conv2d_backward(tape.x, params.kernel("init"), grad_h, need_input_grad=False)
    _accumulate(grads, "init", grad_kernel)
    return grads
