"""
Services module for the BSRN super-resolution toolkit.
"""
from .image_io_service import ImageIOService
from .data_pipeline_service import DataPipelineService
from .checkpoint_service import CheckpointService
from .training_service import TrainingService
from .upscale_service import UpscaleService
from .evaluation_service import EvaluationService
from .gradcheck_service import GradCheckService

__all__ = [
    'ImageIOService', 'DataPipelineService', 'CheckpointService', 'TrainingService',
    'UpscaleService', 'EvaluationService', 'GradCheckService',
]
