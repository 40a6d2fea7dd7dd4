"""
Models module: configuration, parameter and image data models.
"""
from .configs import ModelConfig, TrainConfig
from .images import ImageRGB8, PatchPair, TrainingImage
from .params import ModelParams, count_all_params, count_params, init_params
from .state import AdamState, RecursionState

__all__ = [
    'ModelConfig', 'TrainConfig', 'ImageRGB8', 'PatchPair', 'TrainingImage',
    'ModelParams', 'count_params', 'count_all_params', 'init_params',
    'AdamState', 'RecursionState',
]
