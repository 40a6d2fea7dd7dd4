"""
Configuration data models: architecture (ModelConfig) and training recipe (TrainConfig).
"""
from dataclasses import dataclass
from typing import Tuple

from ..config.settings import settings
from ..utils.errors import ConfigError


@dataclass(frozen=True)
class ModelConfig:
    """Fully determines the architecture and its parameter count.

    c: convolutional channels, s: block-state channels, R: recursions,
    r: frequency control variable, scales: upscaling paths owned by the model.
    """
    c: int = settings.DEFAULT_CHANNELS
    s: int = settings.DEFAULT_STATE_CHANNELS
    R: int = settings.DEFAULT_RECURSIONS
    r: int = settings.DEFAULT_FREQ_CONTROL
    scales: Tuple[int, ...] = settings.SUPPORTED_SCALES

    def __post_init__(self):
        # Normalise scales to a sorted tuple so equal configs compare equal
        object.__setattr__(self, "scales", tuple(sorted(set(int(f) for f in self.scales))))
        self.validate()

    def validate(self):
        if self.c < 1:
            raise ConfigError(f"c must be >= 1, got {self.c}")
        if self.s < 0:
            raise ConfigError(f"s must be >= 0, got {self.s}")
        if self.R < 1:
            raise ConfigError(f"R must be >= 1, got {self.R}")
        check_freq_control(self.R, self.r)
        if not self.scales:
            raise ConfigError("At least one scale is required")
        unsupported = [f for f in self.scales if f not in settings.SUPPORTED_SCALES]
        if unsupported:
            raise ConfigError(f"Unsupported scale(s) {unsupported}; supported: {settings.SUPPORTED_SCALES}")

    def require_scale(self, scale: int):
        if scale not in self.scales:
            raise ConfigError(f"Scale x{scale} is not part of this model (scales: {list(self.scales)})")

    def with_freq_control(self, r: int) -> "ModelConfig":
        return ModelConfig(c=self.c, s=self.s, R=self.R, r=r, scales=self.scales)


def check_freq_control(R: int, r: int):
    if not 1 <= r <= R or R % r != 0:
        raise ConfigError(f"Frequency control r={r} must satisfy 1 <= r <= R and divide R={R}")


@dataclass(frozen=True)
class TrainConfig:
    """The optimisation recipe; defaults mirror the published training setup."""
    batch: int = settings.DEFAULT_BATCH
    base_lr: float = settings.DEFAULT_LR
    halve_every: int = settings.DEFAULT_LR_HALVE_EVERY
    clip_theta: float = settings.DEFAULT_CLIP
    total_steps: int = 0
    seed: int = settings.DEFAULT_SEED
    patch_size: int = settings.DEFAULT_PATCH_SINGLE
    scales: Tuple[int, ...] = settings.SUPPORTED_SCALES
    log_every: int = settings.DEFAULT_LOG_EVERY
    checkpoint_every: int = settings.DEFAULT_CHECKPOINT_EVERY

    def __post_init__(self):
        self.validate()

    def validate(self):
        positives = {
            "batch": self.batch,
            "base_lr": self.base_lr,
            "halve_every": self.halve_every,
            "clip_theta": self.clip_theta,
            "patch_size": self.patch_size,
            "log_every": self.log_every,
            "checkpoint_every": self.checkpoint_every,
        }
        for name, value in positives.items():
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.total_steps < 0:
            raise ConfigError(f"total_steps must be >= 0, got {self.total_steps}")
        if not self.scales:
            raise ConfigError("At least one training scale is required")
