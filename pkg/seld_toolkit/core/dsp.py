"""
STFT-анализ/синтез, мел-фильтры, log-mel признаки и векторы интенсивности FoA
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List

import librosa
import numpy as np
from scipy.signal import get_window

from ..utils.exceptions import ConfigurationError, FormatError, InsufficientInputError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_RATE = 24000
DEFAULT_WINDOW_S = 0.04
DEFAULT_HOP_S = 0.02
DEFAULT_N_MELS = 64
DEFAULT_LOG_FLOOR = 1e-10
IV_GUARD = 1e-9

LAYOUTS = ('logmel', 'iv', 'combined', 'sed', 'beamformed')


@dataclass
class AudioClip:
    """Многоканальный буфер отсчётов: samples имеет форму (каналы, отсчёты)"""
    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[np.newaxis, :]
        if samples.ndim != 2:
            raise ShapeError(f"AudioClip expects (channels, samples), got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise ConfigurationError(f"Invalid sample rate: {self.sample_rate}")
        self.samples = samples

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate

    def channel(self, index: int) -> 'AudioClip':
        return AudioClip(self.samples[index:index + 1].copy(), self.sample_rate)


@dataclass
class SpectralTensor:
    """Комплексные STFT-коэффициенты X_m(f, t) формы (каналы, кадры, бины)"""
    coefficients: np.ndarray
    sample_rate: int
    window_s: float
    hop_s: float
    fft_size: int

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.complex128)
        if self.coefficients.ndim != 3:
            raise ShapeError(f"SpectralTensor expects (channels, frames, bins), "
                             f"got shape {self.coefficients.shape}")
        if self.coefficients.shape[2] != self.fft_size // 2 + 1:
            raise ShapeError(f"Expected {self.fft_size // 2 + 1} bins for fft_size {self.fft_size}, "
                             f"got {self.coefficients.shape[2]}")

    @property
    def channels(self) -> int:
        return self.coefficients.shape[0]

    @property
    def frames(self) -> int:
        return self.coefficients.shape[1]

    @property
    def bins(self) -> int:
        return self.coefficients.shape[2]

    @property
    def hop_samples(self) -> int:
        return _to_samples(self.hop_s, self.sample_rate, 'hop')

    @property
    def window_samples(self) -> int:
        return _to_samples(self.window_s, self.sample_rate, 'window')

    @property
    def frequencies(self) -> np.ndarray:
        return np.fft.rfftfreq(self.fft_size, d=1.0 / self.sample_rate)

    def with_coefficients(self, coefficients: np.ndarray) -> 'SpectralTensor':
        return SpectralTensor(coefficients, self.sample_rate, self.window_s, self.hop_s, self.fft_size)


@dataclass
class FeatureTensor:
    """Вещественные признаки формы (канал признаков, кадры, мел-полосы)"""
    values: np.ndarray
    layout: str
    channel_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ShapeError(f"FeatureTensor expects 3 dimensions, got shape {self.values.shape}")
        if self.layout not in LAYOUTS:
            raise ConfigurationError(f"Unknown feature layout: {self.layout}")

    @property
    def shape(self):
        return self.values.shape


def _to_samples(seconds: float, sample_rate: int, what: str) -> int:
    samples = seconds * sample_rate
    rounded = int(round(samples))
    if rounded <= 0 or abs(samples - rounded) > 1e-6:
        raise ConfigurationError(
            f"{what} of {seconds} s is not a whole number of samples at {sample_rate} Hz"
        )
    return rounded


def stft(clip: AudioClip,
         window_s: float = DEFAULT_WINDOW_S,
         hop_s: float = DEFAULT_HOP_S) -> SpectralTensor:
    """
    STFT с окном Ханна без дополнения нулями

    Args:
        clip (AudioClip): Входной сигнал
        window_s (float): Длина окна в секундах (= размер FFT)
        hop_s (float): Шаг в секундах

    Returns:
        SpectralTensor: floor((N - win) / hop) + 1 кадров, fft_size / 2 + 1 бинов
    """
    if window_s < hop_s:
        raise ConfigurationError(f"Window {window_s} s is shorter than hop {hop_s} s")

    win = _to_samples(window_s, clip.sample_rate, 'window')
    hop = _to_samples(hop_s, clip.sample_rate, 'hop')

    if clip.num_samples < win:
        raise InsufficientInputError(
            f"Clip of {clip.num_samples} samples is shorter than one window ({win})"
        )

    window = get_window('hann', win)
    frames = np.lib.stride_tricks.sliding_window_view(clip.samples, win, axis=-1)[:, ::hop, :]
    coefficients = np.fft.rfft(frames * window, n=win, axis=-1)

    return SpectralTensor(coefficients, clip.sample_rate, window_s, hop_s, win)


def istft(spec: SpectralTensor) -> AudioClip:
    """
    Обратное STFT перекрытием со сложением

    Требует hop = window / 2 (условие COLA для периодического окна Ханна).
    Длина результата (T - 1) * hop + window.
    """
    win = spec.window_samples
    hop = spec.hop_samples
    if win != spec.fft_size or 2 * hop != win:
        raise ConfigurationError(
            f"istft needs hop = window / 2 and fft_size = window (window={win}, hop={hop}, "
            f"fft_size={spec.fft_size})"
        )

    window = get_window('hann', win)
    cola = window[:hop] + window[hop:]
    scale = float(np.mean(cola))

    frames = np.fft.irfft(spec.coefficients, n=spec.fft_size, axis=-1)
    n_frames = spec.frames
    output = np.zeros((spec.channels, (n_frames - 1) * hop + win))
    for t in range(n_frames):
        output[:, t * hop:t * hop + win] += frames[:, t, :]

    return AudioClip(output / scale, spec.sample_rate)


@lru_cache(maxsize=16)
def _cached_filterbank(sample_rate: int, fft_size: int, n_mels: int) -> np.ndarray:
    filterbank = librosa.filters.mel(sr=sample_rate, n_fft=fft_size, n_mels=n_mels,
                                     fmin=0.0, fmax=sample_rate / 2.0,
                                     htk=True, norm=None, dtype=np.float64)
    filterbank.setflags(write=False)
    return filterbank


def mel_filterbank(sample_rate: int, fft_size: int, n_mels: int) -> np.ndarray:
    """
    Треугольные мел-фильтры по шкале HTK от 0 до Найквиста без нормировки площади

    Returns:
        np.ndarray: Матрица (n_mels, fft_size / 2 + 1)
    """
    bins = fft_size // 2 + 1
    if n_mels > bins:
        raise ConfigurationError(f"n_mels ({n_mels}) exceeds the number of bins ({bins})")
    return _cached_filterbank(int(sample_rate), int(fft_size), int(n_mels))


def logmel(spec: SpectralTensor,
           n_mels: int = DEFAULT_N_MELS,
           floor: float = DEFAULT_LOG_FLOOR) -> FeatureTensor:
    """
    Log-mel спектрограмма каждого канала: log(max(melfb . |X|^2, floor))

    Args:
        spec (SpectralTensor): STFT-коэффициенты
        n_mels (int): Количество мел-полос
        floor (float): Нижняя граница мощности

    Returns:
        FeatureTensor: (каналы, кадры, n_mels), layout 'logmel'
    """
    filterbank = mel_filterbank(spec.sample_rate, spec.fft_size, n_mels)
    power = np.abs(spec.coefficients) ** 2
    mel_power = power @ filterbank.T
    values = np.log(np.maximum(mel_power, floor))
    names = [f"logmel_{m}" for m in range(spec.channels)]
    return FeatureTensor(values, 'logmel', names)


def intensity_vectors(spec: SpectralTensor,
                      n_mels: int = DEFAULT_N_MELS,
                      guard: float = IV_GUARD) -> FeatureTensor:
    """
    Векторы интенсивности FoA по мел-полосам

    В каждом бине I = Re{conj(W) * (X, Y, Z)}, нормированный к единичной длине
    (с защитой guard), затем взвешенное среднее по фильтрам каждой мел-полосы.

    Args:
        spec (SpectralTensor): STFT четырёх каналов FoA в порядке (W, X, Y, Z)
        n_mels (int): Количество мел-полос
        guard (float): Защита от деления на ноль

    Returns:
        FeatureTensor: (3, кадры, n_mels), layout 'iv'
    """
    if spec.channels != 4:
        raise FormatError(f"Intensity vectors need 4 FoA channels (W, X, Y, Z), got {spec.channels}")

    w = spec.coefficients[0]
    intensity = np.real(np.conj(w)[np.newaxis] * spec.coefficients[1:4])
    norm = np.sqrt(np.sum(intensity ** 2, axis=0, keepdims=True))
    unit = intensity / np.maximum(norm, guard)

    filterbank = mel_filterbank(spec.sample_rate, spec.fft_size, n_mels)
    weights = filterbank.sum(axis=1)
    banded = (unit @ filterbank.T) / np.maximum(weights, guard)

    return FeatureTensor(banded, 'iv', ['iv_x', 'iv_y', 'iv_z'])


def assemble_features(logmels: FeatureTensor, ivs: FeatureTensor) -> FeatureTensor:
    """
    Сборка входа DoA-сети: 4 log-mel канала FoA + 3 канала IV

    Returns:
        FeatureTensor: (7, T, n_mels), layout 'combined'
    """
    if logmels.values.shape[0] != 4 or ivs.values.shape[0] != 3:
        raise ShapeError(f"Expected 4 log-mel and 3 IV channels, got "
                         f"{logmels.values.shape[0]} and {ivs.values.shape[0]}")
    if logmels.values.shape[1:] != ivs.values.shape[1:]:
        raise ShapeError(f"Frame/mel mismatch: log-mel {logmels.values.shape[1:]} "
                         f"vs IV {ivs.values.shape[1:]}")

    values = np.concatenate([logmels.values, ivs.values], axis=0)
    names = ['logmel_w', 'logmel_x', 'logmel_y', 'logmel_z', 'iv_x', 'iv_y', 'iv_z']
    return FeatureTensor(values, 'combined', names)


def sed_features(mic_clip: AudioClip,
                 n_mels: int = DEFAULT_N_MELS,
                 window_s: float = DEFAULT_WINDOW_S,
                 hop_s: float = DEFAULT_HOP_S,
                 floor: float = DEFAULT_LOG_FLOOR) -> FeatureTensor:
    """Вход SED-сети: log-mel первого канала микрофонной решётки, (1, T, n_mels)"""
    spec = stft(mic_clip.channel(0), window_s, hop_s)
    values = logmel(spec, n_mels, floor).values
    return FeatureTensor(values, 'sed', ['logmel_mic0'])


def beamformed_features(tracks: SpectralTensor,
                        n_mels: int = DEFAULT_N_MELS,
                        floor: float = DEFAULT_LOG_FLOOR) -> FeatureTensor:
    """Log-mel выходов бимформера по трекам, (K, T, n_mels)"""
    values = logmel(tracks, n_mels, floor).values
    return FeatureTensor(values, 'beamformed', [f"bf_track{k}" for k in range(tracks.channels)])


def concat_features(first: FeatureTensor, second: FeatureTensor) -> FeatureTensor:
    """Конкатенация по каналам (вариант с добавлением выходов бимформера)"""
    if first.values.shape[1:] != second.values.shape[1:]:
        raise ShapeError(f"Cannot concatenate {first.values.shape} and {second.values.shape}")
    return FeatureTensor(np.concatenate([first.values, second.values], axis=0),
                         first.layout,
                         list(first.channel_names) + list(second.channel_names))
