"""
Утилиты для работы с конфигурацией
"""
import json
import logging
import os
import re
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

from .exceptions import ConfigurationError

load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_NAMES = ('seld.yaml', 'seld.yml', 'seld.json')
OUTPUT_DIR_ENV = 'SELD_OUTPUT_DIR'
LOG_LEVEL_ENV = 'SELD_LOG_LEVEL'
LOG_FILE_NAME = 'seld.log'


@dataclass
class PipelineConfig:
    """Конфигурация пайплайна"""
    # Пути
    scene_path: Optional[str] = None
    foa_path: Optional[str] = None
    mic_path: Optional[str] = None
    metadata_path: Optional[str] = None
    pred_metadata_path: Optional[str] = None
    output_dir: str = 'seld_output'

    # Препроцессинг
    sample_rate: int = 24000
    window_s: float = 0.04
    hop_s: float = 0.02
    n_mels: int = 64
    log_floor: float = 1e-10
    label_hop_s: float = 0.1
    clip_s: float = 5.0

    # Треки и классы
    n_tracks: int = 6
    n_class: int = 13

    # Распространение звука
    speed_of_sound: float = 343.0
    wavefront: str = 'plane'
    source_distance: float = 1.0
    array_radius: float = 0.042

    # Оценка
    activity_threshold_db: float = -40.0
    doa_threshold_deg: float = 20.0
    segment_s: float = 1.0

    seed: Optional[int] = None
    log_file: Optional[str] = None
    log_level: str = 'INFO'

    def __post_init__(self):
        if self.window_s < self.hop_s:
            raise ConfigurationError(
                f"window_s ({self.window_s}) must be >= hop_s ({self.hop_s})"
            )
        if self.n_tracks < 1:
            raise ConfigurationError(f"n_tracks must be positive, got {self.n_tracks}")
        if self.n_class < 1:
            raise ConfigurationError(f"n_class must be positive, got {self.n_class}")
        if self.wavefront not in ('plane', 'spherical'):
            raise ConfigurationError(f"Unknown wavefront model: {self.wavefront}")
        if self.array_radius <= 0:
            raise ConfigurationError("array_radius must be positive")
        if self.speed_of_sound <= 0:
            raise ConfigurationError("speed_of_sound must be positive")

    @property
    def label_frames_per_clip(self) -> int:
        return int(round(self.clip_s / self.label_hop_s))

    @property
    def log_path(self) -> str:
        """Файл лога; по умолчанию <output_dir>/seld.log"""
        return self.log_file or os.path.join(self.output_dir, LOG_FILE_NAME)

    @classmethod
    def from_sources(cls,
                     file_config: Dict[str, Any] = None,
                     cli_config: Dict[str, Any] = None) -> 'PipelineConfig':
        """
        Сборка конфигурации из файла и флагов командной строки

        Приоритет: файл конфигурации > флаги > значения по умолчанию.

        Args:
            file_config (dict): Секция 'pipeline' из файла конфигурации
            cli_config (dict): Значения флагов (None - флаг не задан)

        Returns:
            PipelineConfig: Итоговая конфигурация
        """
        file_config = file_config or {}
        cli_config = cli_config or {}

        known = {f.name for f in fields(cls)}
        unknown = set(file_config) - known
        if unknown:
            logger.warning(f"Ignoring unknown config keys: {', '.join(sorted(unknown))}")

        defaults = {'output_dir': os.getenv(OUTPUT_DIR_ENV, cls.output_dir),
                    'log_level': os.getenv(LOG_LEVEL_ENV, cls.log_level)}

        values = {}
        for name in known:
            if name in file_config and file_config[name] is not None:
                values[name] = file_config[name]
            elif cli_config.get(name) is not None:
                values[name] = cli_config[name]
            elif name in defaults:
                values[name] = defaults[name]

        # YAML отдаёт '1e-10' строкой
        for f in fields(cls):
            if f.name in values and f.type in (int, float):
                try:
                    values[f.name] = f.type(values[f.name])
                except (TypeError, ValueError) as e:
                    raise ConfigurationError(f"Invalid value for {f.name}: {values[f.name]!r}") from e

        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def load_config(config_path: str = None) -> Dict[str, Any]:
    """
    Загрузка конфигурации из файла

    Args:
        config_path (str): Путь к конфигурационному файлу

    Returns:
        dict: Конфигурация
    """
    if config_path and not os.path.exists(config_path):
        raise ConfigurationError(f"Config file not found: {config_path}")

    # Проверяем несколько возможных мест
    possible_paths = [config_path, *DEFAULT_CONFIG_NAMES]

    for path in possible_paths:
        if not path or not os.path.exists(path):
            continue

        try:
            with open(path, 'r', encoding='utf-8') as f:
                if path.endswith('.json'):
                    config = json.load(f)
                else:
                    config = yaml.safe_load(f)
        except (OSError, ValueError, yaml.YAMLError) as e:
            raise ConfigurationError(f"Error loading config from {path}: {e}") from e

        if not isinstance(config, dict):
            raise ConfigurationError(f"Config root must be a mapping: {path}")

        # Заменяем переменные окружения
        config = _replace_env_vars(config)

        logger.info(f"Loaded config from {path}")
        return config

    # Конфигурация по умолчанию
    return get_default_config()


def get_default_config() -> Dict[str, Any]:
    """Конфигурация по умолчанию: пустая секция, действуют флаги и умолчания PipelineConfig"""
    return {'pipeline': {}}


def get_config_template() -> Dict[str, Any]:
    """Шаблон конфигурации со всеми параметрами (команда init)"""
    return {'pipeline': PipelineConfig().to_dict()}


def get_pipeline_section(config: Dict[str, Any]) -> Dict[str, Any]:
    """Секция пайплайна (допускается плоский файл без секции)"""
    if 'pipeline' in config:
        return config['pipeline'] or {}
    return config


def _replace_env_vars(config: Dict[str, Any]) -> Dict[str, Any]:
    """Замена переменных окружения в конфиге"""

    def replace(obj):
        if isinstance(obj, str):
            # Заменяем ${VAR_NAME}
            return re.sub(r'\$\{(\w+)\}', lambda m: os.getenv(m.group(1), ''), obj)
        elif isinstance(obj, dict):
            return {k: replace(v) for k, v in obj.items()}
        elif isinstance(obj, list):
            return [replace(item) for item in obj]
        else:
            return obj

    return replace(config)


def save_config(config: Dict[str, Any], config_path: str = 'seld.yaml'):
    """
    Сохранение конфигурации в файл

    Args:
        config (dict): Конфигурация
        config_path (str): Путь для сохранения
    """
    directory = os.path.dirname(config_path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    with open(config_path, 'w', encoding='utf-8') as f:
        if config_path.endswith('.json'):
            json.dump(config, f, indent=2, ensure_ascii=False)
        else:
            yaml.dump(config, f, default_flow_style=False, allow_unicode=True, sort_keys=False)

    logger.info(f"Config saved to {config_path}")
