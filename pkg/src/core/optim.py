"""
Loss, gradient clipping, Adam and the step-halving learning-rate schedule.
"""
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from ..config.settings import settings
from ..models.configs import TrainConfig
from ..models.state import AdamState
from ..utils.errors import ConfigError, ShapeError


def l1_loss(yhat: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
    """Pixel-wise L1 loss normalised by the spatial resolution only.

    Differences are summed over colour channels and divided by w' * h'.
    The gradient uses sign(0) = 0.
    """
    if yhat.shape != y.shape:
        raise ShapeError(f"Prediction {yhat.shape} and target {y.shape} differ")
    spatial = yhat.shape[-2] * yhat.shape[-1]
    diff = yhat.astype(np.float64) - y.astype(np.float64)
    loss = float(np.abs(diff).sum() / spatial)
    grad = (np.sign(diff) / spatial).astype(np.float32)
    return loss, grad


def grad_norm(g: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.square(g, dtype=np.float64))))


def clip_gradient(g: np.ndarray, theta: float = settings.DEFAULT_CLIP) -> np.ndarray:
    """Rescale g to L2 norm theta when its norm exceeds theta."""
    if theta <= 0:
        raise ConfigError(f"theta must be positive, got {theta}")
    norm = grad_norm(g)
    if norm > theta:
        return (g.astype(np.float64) * (theta / norm)).astype(g.dtype)
    return g


def clip_gradients(grads: Mapping[str, np.ndarray], theta: float) -> Tuple[Dict[str, np.ndarray], Dict[str, float]]:
    """Clip every named tensor independently; also return the pre-clip norms."""
    clipped = {}
    norms = {}
    for name, g in grads.items():
        norms[name] = grad_norm(g)
        clipped[name] = clip_gradient(g, theta)
    return clipped, norms


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, Optional[np.ndarray]],
    state: AdamState,
    lr: float,
    beta1: float = settings.ADAM_BETA1,
    beta2: float = settings.ADAM_BETA2,
    epsilon: float = settings.ADAM_EPSILON,
) -> Tuple[Mapping[str, np.ndarray], AdamState]:
    """Bias-corrected Adam update applied in place to `params`.

    A tensor whose gradient is missing or identically zero is left alone,
    moments included. The step counter advances once per call.
    """
    if lr <= 0:
        raise ConfigError(f"Learning rate must be positive, got {lr}")
    state.step += 1
    t = state.step
    correction1 = 1.0 - beta1 ** t
    correction2 = 1.0 - beta2 ** t

    for name, g in grads.items():
        if name not in params:
            raise ShapeError(f"Gradient for unknown parameter {name}")
        p = params[name]
        if g is None or not np.any(g):
            continue
        if g.shape != p.shape:
            raise ShapeError(f"Gradient {name} has shape {g.shape}, parameter has {p.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)

        g64 = g.astype(np.float64)
        m = beta1 * state.m[name] + (1.0 - beta1) * g64
        v = beta2 * state.v[name] + (1.0 - beta2) * g64 * g64
        state.m[name] = m.astype(np.float32)
        state.v[name] = v.astype(np.float32)

        m_hat = m / correction1
        v_hat = v / correction2
        p -= (lr * m_hat / (np.sqrt(v_hat) + epsilon)).astype(p.dtype)
    return params, state


def lr_schedule(step: int, cfg: TrainConfig) -> float:
    """base_lr * 0.5 ** floor(step / halve_every)."""
    if step < 0:
        raise ConfigError(f"step must be >= 0, got {step}")
    return cfg.base_lr * 0.5 ** (step // cfg.halve_every)
