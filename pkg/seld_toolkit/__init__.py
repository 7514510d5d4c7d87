"""
SELD Toolkit - локализация и детекция звуковых событий
Синтез сцен (FoA, тетраэдрическая решётка), признаки, трековые метки,
бимформинг по трекам, PIT-потери, метрики SELD и слияние признаков
"""

__version__ = "1.0.0"
__author__ = "SELD Toolkit Team"

from .core.geometry import AzEl, azel_to_unit, unit_to_azel, angular_distance
from .core.dsp import AudioClip, SpectralTensor, FeatureTensor, stft, istft
from .core.scene import SceneConfig, EventSpec, MicArrayGeometry, encode_foa, render_micarray
from .core.signal_factory import SignalFactory, create_signal
from .core.trackwise import ClipLabels, EventInstance, reorder_events
from .core.beamform import ds_beamform
from .core.assign import hungarian, pit_losses
from .core.metrics import MetricsReport, compute_seld_metrics, seld_score
from .services.pipeline import SeldPipeline
from .utils.exceptions import SeldError
from .utils.config import PipelineConfig, load_config

__all__ = [
    'AzEl',
    'azel_to_unit',
    'unit_to_azel',
    'angular_distance',
    'AudioClip',
    'SpectralTensor',
    'FeatureTensor',
    'stft',
    'istft',
    'SceneConfig',
    'EventSpec',
    'MicArrayGeometry',
    'encode_foa',
    'render_micarray',
    'SignalFactory',
    'create_signal',
    'ClipLabels',
    'EventInstance',
    'reorder_events',
    'ds_beamform',
    'hungarian',
    'pit_losses',
    'MetricsReport',
    'compute_seld_metrics',
    'seld_score',
    'SeldPipeline',
    'SeldError',
    'PipelineConfig',
    'load_config',
]


# Упрощенный интерфейс для быстрого старта
def get_pipeline(output_dir: str = None, **kwargs) -> SeldPipeline:
    """
    Быстрое создание пайплайна

    Args:
        output_dir (str): Каталог артефактов
        **kwargs: Поля PipelineConfig

    Returns:
        SeldPipeline: Пайплайн
    """
    if output_dir is not None:
        kwargs['output_dir'] = output_dir
    return SeldPipeline(PipelineConfig(**kwargs))
