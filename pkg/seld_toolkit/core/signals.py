"""
Базовый класс и реализации моно-сигналов для событий сцены
"""
import abc
import logging
from typing import Any, Dict

import numpy as np

from ..utils.exceptions import ConfigurationError, FormatError

logger = logging.getLogger(__name__)


class BaseSignal(abc.ABC):
    """Абстрактный генератор моно-сигнала события"""

    name = 'base'

    def __init__(self, amplitude: float = 0.1, **kwargs):
        """
        Инициализация генератора

        Args:
            amplitude (float): Амплитуда (для шума - СКО)
        """
        if amplitude < 0:
            raise ConfigurationError(f"Amplitude cannot be negative: {amplitude}")
        self.amplitude = float(amplitude)
        self.params = dict(kwargs)

    @abc.abstractmethod
    def render(self, num_samples: int, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
        """Сгенерировать num_samples отсчётов"""
        pass

    def describe(self) -> Dict[str, Any]:
        """Параметры генератора для логов и сериализации"""
        return {'type': self.name, 'amplitude': self.amplitude, **self.params}

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__} amplitude={self.amplitude}>"


class ToneSignal(BaseSignal):
    """Синусоидальный тон"""

    name = 'tone'

    def __init__(self, frequency: float = 1000.0, amplitude: float = 0.5, phase: float = 0.0, **kwargs):
        super().__init__(amplitude=amplitude, **kwargs)
        if frequency <= 0:
            raise ConfigurationError(f"Tone frequency must be positive, got {frequency}")
        self.frequency = float(frequency)
        self.phase = float(phase)

    def render(self, num_samples: int, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
        if self.frequency >= sample_rate / 2:
            raise ConfigurationError(
                f"Tone at {self.frequency} Hz is above Nyquist for {sample_rate} Hz"
            )
        t = np.arange(num_samples) / sample_rate
        return self.amplitude * np.sin(2.0 * np.pi * self.frequency * t + self.phase)

    def describe(self) -> Dict[str, Any]:
        return {**super().describe(), 'frequency': self.frequency, 'phase': self.phase}


class NoiseBurstSignal(BaseSignal):
    """Белый гауссов шум (широкополосный источник)"""

    name = 'noise'

    def render(self, num_samples: int, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
        return self.amplitude * rng.standard_normal(num_samples)


class ClipSignal(BaseSignal):
    """Готовый моно-сигнал (массив или WAV-файл), повторяется до нужной длины"""

    name = 'clip'

    def __init__(self, samples: np.ndarray = None, path: str = None, amplitude: float = 1.0, **kwargs):
        super().__init__(amplitude=amplitude, **kwargs)
        if samples is None and path is None:
            raise ConfigurationError("Clip signal needs samples or a WAV path")
        self.path = path
        self._samples = None if samples is None else np.asarray(samples, dtype=np.float64)

    def _load(self, sample_rate: int) -> np.ndarray:
        if self._samples is None:
            from ..formats.wav import read_wav
            clip = read_wav(self.path, expected_rate=sample_rate)
            if clip.channels != 1:
                raise FormatError(f"Event signal {self.path} must be mono, got {clip.channels} channels")
            self._samples = clip.samples[0]
        return self._samples

    def render(self, num_samples: int, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
        samples = self._load(sample_rate)
        if samples.size == 0:
            raise FormatError("Event signal is empty")
        repeats = -(-num_samples // samples.size)
        return self.amplitude * np.tile(samples, repeats)[:num_samples]

    def describe(self) -> Dict[str, Any]:
        description = super().describe()
        if self.path:
            description['path'] = self.path
        return description
