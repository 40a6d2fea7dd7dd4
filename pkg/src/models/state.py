"""
State carried between operations: the recursion state (H_t, S_t) and Adam's moments.
"""
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ..utils.errors import ShapeError


@dataclass
class RecursionState:
    """Intermediate features H (c channels) and block state S (s channels)."""
    H: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        if self.H.ndim != 3 or self.S.ndim != 3:
            raise ShapeError("H and S must be (channels, height, width) maps")
        if self.H.shape[1:] != self.S.shape[1:]:
            raise ShapeError(f"H {self.H.shape} and S {self.S.shape} must share spatial dims")


@dataclass
class AdamState:
    """First/second moment accumulators keyed by parameter name, plus the global step."""
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
