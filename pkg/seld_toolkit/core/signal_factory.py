"""
Фабрика генераторов сигналов
"""
import logging
from typing import Any, Dict, Type

from .signals import BaseSignal, ClipSignal, NoiseBurstSignal, ToneSignal
from ..utils.exceptions import ConfigurationError

logger = logging.getLogger(__name__)


class SignalFactory:
    """Фабрика для создания генераторов сигналов"""

    # Реестр классов сигналов
    _signal_classes: Dict[str, Type[BaseSignal]] = {
        'tone': ToneSignal,
        'noise': NoiseBurstSignal,
        'clip': ClipSignal,
    }

    # Параметры по умолчанию
    _default_configs: Dict[str, Dict[str, Any]] = {
        'tone': {'frequency': 1000.0, 'amplitude': 0.5},
        'noise': {'amplitude': 0.1},
        'clip': {'amplitude': 1.0},
    }

    @classmethod
    def register_signal(cls, name: str, signal_class: Type[BaseSignal], config: Dict[str, Any] = None):
        """
        Регистрация нового генератора

        Args:
            name (str): Имя генератора в конфигурации сцены
            signal_class (Type[BaseSignal]): Класс генератора
            config (Dict): Параметры по умолчанию
        """
        name = name.lower()
        cls._signal_classes[name] = signal_class

        if config:
            cls._default_configs[name] = config

        logger.info(f"Registered signal generator: {name}")

    @classmethod
    def create(cls, name: str, config: Dict[str, Any] = None, **kwargs) -> BaseSignal:
        """
        Создать генератор сигнала

        Args:
            name (str): Имя генератора ('tone', 'noise', 'clip')
            config (Dict): Параметры генератора
            **kwargs: Дополнительные параметры

        Returns:
            BaseSignal: Экземпляр генератора
        """
        name = name.lower()

        if name not in cls._signal_classes:
            raise ConfigurationError(
                f"Unsupported signal type: {name}. "
                f"Supported: {', '.join(cls._signal_classes.keys())}"
            )

        # 1. Параметры по умолчанию, 2. конфигурация, 3. дополнительные параметры
        final_config = dict(cls._default_configs.get(name, {}))
        if config:
            final_config.update(config)
        final_config.update(kwargs)
        final_config.pop('type', None)

        try:
            signal = cls._signal_classes[name](**final_config)
        except TypeError as e:
            raise ConfigurationError(f"Invalid parameters for signal '{name}': {e}") from e

        logger.debug(f"Created {name} signal generator")
        return signal

    @classmethod
    def get_supported_signals(cls) -> list:
        """Получить список поддерживаемых генераторов"""
        return list(cls._signal_classes.keys())


def create_signal(name: str, **kwargs) -> BaseSignal:
    """Быстрое создание генератора сигнала"""
    return SignalFactory.create(name, **kwargs)
