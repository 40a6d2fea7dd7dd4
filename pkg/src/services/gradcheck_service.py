"""
Gradient verification harness.

Compares analytic gradients with central finite differences
(perturbation 1e-2 * max(1, |theta|)) for every primitive and for every
parameter tensor of a small model, and checks that the gradient of the
shared RRB kernels equals the sum of per-iteration gradients of an
unrolled copy with untied weights.
"""
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from ..config.settings import settings
from ..core import bsrn_model
from ..core.optim import l1_loss
from ..core.tensor_core import (
    ConvKernel,
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
from ..models.configs import ModelConfig
from ..models.params import RRB_CONV_COUNT, ModelParams, init_params
from ..utils.errors import BSRNError
from ..utils.logging_utils import setup_logger

# Set up logger for this module
logger = setup_logger("GradCheckService")

BackwardFn = Callable[[bsrn_model.ForwardTape, ModelParams, np.ndarray], Dict[str, np.ndarray]]

RELATIVE_STEP = 1e-2
# End-to-end instances keep RRB ReLU inputs this far from zero
RELU_MARGIN = 0.25
RELU_BIAS = 0.5
MAX_WEIGHT_HALVINGS = 12


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-wise relative error between two gradient tensors."""
    a = analytic.astype(np.float64).ravel()
    n = numeric.astype(np.float64).ravel()
    scale = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / scale)


def guarded_numeric_gradient(
    loss_fn: Callable[[], float],
    array: np.ndarray,
    pattern_fn: Optional[Callable[[], np.ndarray]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Central differences of loss_fn with respect to every entry of `array` (perturbed in place).

    `pattern_fn` reports the ReLU sign pattern of the most recent loss_fn
    call. An entry whose +h or -h evaluation changes that pattern straddles
    a kink; it is returned as invalid and must be left out of the comparison.
    """
    grad = np.zeros(array.shape, dtype=np.float64)
    valid = np.ones(array.shape, dtype=bool)
    baseline = None
    if pattern_fn is not None:
        loss_fn()
        baseline = pattern_fn().copy()

    flat = array.reshape(-1)
    out = grad.reshape(-1)
    ok = valid.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        h = RELATIVE_STEP * max(1.0, abs(float(original)))
        flat[i] = original + h
        plus_value = float(flat[i])
        loss_plus = loss_fn()
        if baseline is not None and not np.array_equal(pattern_fn(), baseline):
            ok[i] = False
        flat[i] = original - h
        minus_value = float(flat[i])
        loss_minus = loss_fn()
        if baseline is not None and not np.array_equal(pattern_fn(), baseline):
            ok[i] = False
        flat[i] = original
        out[i] = (loss_plus - loss_minus) / (plus_value - minus_value)
    return grad, valid


def numeric_gradient(loss_fn: Callable[[], float], array: np.ndarray) -> np.ndarray:
    """Central differences of loss_fn with respect to every entry of `array` (perturbed in place)."""
    return guarded_numeric_gradient(loss_fn, array)[0]


def relu_pattern(tape: bsrn_model.ForwardTape) -> np.ndarray:
    """Sign pattern of every RRB ReLU input of one forward pass."""
    return np.concatenate([(cache.y1 > 0).ravel() for cache in tape.rrb_caches])


def relu_margin(tape: bsrn_model.ForwardTape) -> float:
    """Smallest distance of any RRB ReLU input from the kink."""
    return float(min(np.abs(cache.y1).min() for cache in tape.rrb_caches))


class TapedLoss:
    """L1 loss of a full forward pass that remembers the ReLU pattern of its last call."""

    def __init__(self, x: np.ndarray, params: ModelParams, scale: int, target: np.ndarray):
        self.x = x
        self.params = params
        self.scale = scale
        self.target = target
        self.tape: Optional[bsrn_model.ForwardTape] = None

    def __call__(self) -> float:
        self.tape = bsrn_model.forward_tape(self.x, self.params, self.scale)
        return l1_loss(self.tape.output, self.target)[0]

    def pattern(self) -> np.ndarray:
        return relu_pattern(self.tape)


def _gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(shape).astype(np.float32)


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a.astype(np.float64) * b.astype(np.float64)))


def corrupt_backward(backward_fn: BackwardFn = bsrn_model.backward, factor: float = 1.5) -> BackwardFn:
    """Test hook: a backward pass whose shared RRB gradients are deliberately wrong."""
    def corrupted(tape, params, grad_output):
        grads = backward_fn(tape, params, grad_output)
        return {name: g * np.float32(factor) if name.startswith("rrb/") else g for name, g in grads.items()}
    return corrupted


@dataclass
class GradCheckReport:
    errors: "OrderedDict[str, float]" = field(default_factory=OrderedDict)
    tolerance: float = settings.GRADCHECK_TOLERANCE

    @property
    def failures(self):
        return [name for name, err in self.errors.items() if not err < self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failures

    def lines(self):
        for name, err in self.errors.items():
            status = "ok" if err < self.tolerance else "FAIL"
            yield f"{name:<32} {err:.3e}  {status}"


class GradCheckService:
    """Runs primitive, end-to-end and tied-weight gradient checks."""

    def __init__(self, seed: int = 0, backward_fn: BackwardFn = bsrn_model.backward):
        self.seed = seed
        self.backward_fn = backward_fn

    # -- primitives ---------------------------------------------------------

    def check_primitives(self) -> "OrderedDict[str, float]":
        rng = np.random.default_rng(self.seed)
        errors = OrderedDict()

        x = _gaussian(rng, (3, 5, 6))
        kernel = ConvKernel(weights=_gaussian(rng, (3, 3, 3, 4)), bias=_gaussian(rng, (4,)))
        upstream = _gaussian(rng, (4, 5, 6))
        loss = lambda: _dot(conv2d_forward(x, kernel), upstream)  # noqa: E731
        grad_x, grad_k = conv2d_backward(x, kernel, upstream)
        errors["primitive/conv2d/input"] = relative_error(grad_x, numeric_gradient(loss, x))
        errors["primitive/conv2d/weight"] = relative_error(grad_k.weights, numeric_gradient(loss, kernel.weights))
        errors["primitive/conv2d/bias"] = relative_error(grad_k.bias, numeric_gradient(loss, kernel.bias))

        # Keep ReLU inputs well away from the kink
        r = (rng.choice([-1.0, 1.0], size=(4, 6, 6)) * rng.uniform(0.1, 1.0, size=(4, 6, 6))).astype(np.float32)
        upstream = _gaussian(rng, r.shape)
        errors["primitive/relu"] = relative_error(
            relu_backward(r, upstream), numeric_gradient(lambda: _dot(relu_forward(r), upstream), r)
        )

        d = _gaussian(rng, (4, 3, 3))
        upstream = _gaussian(rng, (1, 6, 6))
        errors["primitive/depth_to_space"] = relative_error(
            space_to_depth(upstream, 2), numeric_gradient(lambda: _dot(depth_to_space(d, 2), upstream), d)
        )

        a = _gaussian(rng, (2, 4, 4))
        b = _gaussian(rng, (3, 4, 4))
        upstream = _gaussian(rng, (5, 4, 4))
        grad_a, grad_b = split_channels(upstream, 2)
        loss = lambda: _dot(concat_channels(a, b), upstream)  # noqa: E731
        errors["primitive/concat_split"] = max(
            relative_error(grad_a, numeric_gradient(loss, a)),
            relative_error(grad_b, numeric_gradient(loss, b)),
        )

        p = _gaussian(rng, (2, 4, 4))
        q = _gaussian(rng, (2, 4, 4))
        upstream = _gaussian(rng, (2, 4, 4))
        loss = lambda: _dot(add(p, q), upstream)  # noqa: E731
        errors["primitive/add"] = max(
            relative_error(upstream, numeric_gradient(loss, p)),
            relative_error(upstream, numeric_gradient(loss, q)),
        )
        return errors

    # -- end to end ---------------------------------------------------------

    def _target_away_from_kink(self, output: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """A target whose residuals are +-[0.5, 1], so L1 stays differentiable under perturbation."""
        offset = rng.choice([-1.0, 1.0], size=output.shape) * rng.uniform(0.5, 1.0, size=output.shape)
        return (output - offset).astype(np.float32)

    def check_end_to_end(
        self, c: int = 4, s: int = 4, R: int = 2, size: int = 8, scales=(2, 3, 4)
    ) -> "OrderedDict[str, float]":
        """Relative error of every parameter tensor's gradient, worst case over scales."""
        config = ModelConfig(c=c, s=s, R=R, r=1, scales=tuple(scales))
        params = init_params(config, self.seed)
        rng = np.random.default_rng(self.seed + 1)
        # Non-zero biases so bias gradients are exercised away from the symmetric start
        for name, tensor in params.items():
            if name.endswith("/bias"):
                tensor[...] = rng.uniform(-0.1, 0.1, size=tensor.shape).astype(np.float32)
        x = rng.uniform(0.0, 1.0, size=(3, size, size)).astype(np.float32)
        self._separate_relu_inputs(x, params)

        errors = OrderedDict((name, 0.0) for name in params)
        for scale in config.scales:
            target = self._target_away_from_kink(bsrn_model.forward(x, params, scale).output, rng)
            loss = TapedLoss(x, params, scale, target)

            tape = bsrn_model.forward_tape(x, params, scale)
            _, grad_output = l1_loss(tape.output, target)
            analytic = self.backward_fn(tape, params, grad_output)
            for name, tensor in params.items():
                if name.startswith("head/") and not name.startswith(f"head/x{scale}/"):
                    continue
                numeric, valid = guarded_numeric_gradient(loss, tensor, loss.pattern)
                skipped = int(valid.size - valid.sum())
                if skipped:
                    logger.warning(f"x{scale} {name}: {skipped}/{valid.size} entries straddle a ReLU kink, skipped")
                grad = analytic.get(name, np.zeros_like(tensor))
                err = relative_error(grad[valid], numeric[valid])
                errors[name] = max(errors[name], err)
                logger.debug(f"x{scale} {name}: relative error {err:.3e}")
        return errors

    def _separate_relu_inputs(self, x: np.ndarray, params: ModelParams):
        """Keep every RRB ReLU input at least RELU_MARGIN away from zero.

        Output channels of the first RRB conv get biases of alternating sign,
        so half the ReLUs stay open and half stay closed, and the conv weights
        are halved until no input comes closer to the kink than the margin.
        """
        bias = params["rrb/0/bias"]
        weight = params["rrb/0/weight"]
        signs = np.where(np.arange(bias.size) % 2 == 0, 1.0, -1.0)
        bias[...] = (RELU_BIAS * signs).astype(np.float32)
        scale = params.config.scales[0]
        for _ in range(MAX_WEIGHT_HALVINGS):
            margin = relu_margin(bsrn_model.forward_tape(x, params, scale))
            if margin >= RELU_MARGIN:
                logger.debug(f"RRB ReLU inputs at least {margin:.3f} from zero")
                return
            weight *= np.float32(0.5)
        raise BSRNError(f"Could not keep RRB ReLU inputs {RELU_MARGIN} away from zero")

    # -- tied weights -------------------------------------------------------

    def check_tied_weights(self, c: int = 2, s: int = 2, R: int = 3, size: int = 6, scale: int = 2) -> float:
        """Worst relative error between tied RRB gradients and the sum over an untied unrolled copy."""
        config = ModelConfig(c=c, s=s, R=R, r=1, scales=(scale,))
        params = init_params(config, self.seed)
        rng = np.random.default_rng(self.seed + 2)
        x = rng.uniform(0.0, 1.0, size=(3, size, size)).astype(np.float32)

        tape = bsrn_model.forward_tape(x, params, scale)
        target = self._target_away_from_kink(tape.output, rng)
        _, grad_output = l1_loss(tape.output, target)
        tied = self.backward_fn(tape, params, grad_output)

        # Unrolled model: iteration t owns private copies of the three kernels
        untied_kernels = [
            [ConvKernel(weights=k.weights.copy(), bias=k.bias.copy()) for k in params.rrb_kernels()]
            for _ in range(R)
        ]
        state = bsrn_model.extract_features(x, params)
        caches, head_caches = [], []
        for t in range(R):
            state, cache = bsrn_model.rrb_forward(state, untied_kernels[t])
            caches.append(cache)
            head_caches.append(bsrn_model.head_forward_tape(state.H, params, scale)[1])

        weights = bsrn_model.combination_weights(R, 1)
        head_grads: Dict[str, np.ndarray] = {}
        grad_h = np.zeros_like(state.H)
        grad_s = np.zeros_like(state.S)
        summed = [None] * RRB_CONV_COUNT
        for t in reversed(range(R)):
            grad_image = (weights[t] * grad_output.astype(np.float64)).astype(np.float32)
            grad_h = grad_h + bsrn_model.head_backward(head_caches[t], params, scale, grad_image, head_grads)
            grad_h, grad_s, kernel_grads = bsrn_model.rrb_backward(caches[t], untied_kernels[t], grad_h, grad_s)
            for i, gk in enumerate(kernel_grads):
                if summed[i] is None:
                    summed[i] = (gk.weights.astype(np.float64), gk.bias.astype(np.float64))
                else:
                    summed[i] = (summed[i][0] + gk.weights, summed[i][1] + gk.bias)

        worst = 0.0
        for i in range(RRB_CONV_COUNT):
            worst = max(
                worst,
                relative_error(tied[f"rrb/{i}/weight"], summed[i][0]),
                relative_error(tied[f"rrb/{i}/bias"], summed[i][1]),
            )
        logger.info(f"Tied-weight gradient identity: worst relative error {worst:.3e}")
        return worst

    def run(self) -> GradCheckReport:
        report = GradCheckReport()
        report.errors.update(self.check_primitives())
        report.errors.update(self.check_end_to_end())
        report.errors["tied_weights/rrb"] = self.check_tied_weights()
        for line in report.lines():
            logger.info(line)
        if report.passed:
            logger.info(f"All {len(report.errors)} gradient groups within {report.tolerance:g}")
        else:
            logger.error(f"Gradient check failed for: {', '.join(report.failures)}")
        return report
