"""
Чтение и запись многоканальных WAV
"""
import logging
import os

import numpy as np
import soundfile as sf
from scipy.io import wavfile

from ..core.dsp import DEFAULT_SAMPLE_RATE, AudioClip
from ..utils.exceptions import FormatError

logger = logging.getLogger(__name__)

SUBTYPES = ('PCM_16', 'PCM_24', 'FLOAT')


def read_wav(path: str, expected_rate: int = DEFAULT_SAMPLE_RATE) -> AudioClip:
    """
    Чтение WAV (PCM 16/24 бит или 32-битный float)

    Args:
        path (str): Путь к файлу
        expected_rate (int): Требуемая частота дискретизации (None - любая)

    Returns:
        AudioClip: Сигнал формы (каналы, отсчёты)
    """
    if not os.path.exists(path):
        raise FormatError(f"WAV file not found: {path}")

    try:
        data, sample_rate = sf.read(path, dtype='float64', always_2d=True)
    except RuntimeError as e:
        raise FormatError(f"Cannot read WAV {path}: {e}") from e

    if expected_rate is not None and sample_rate != expected_rate:
        raise FormatError(
            f"{path} is sampled at {sample_rate} Hz, expected {expected_rate} Hz (no resampler)"
        )

    logger.debug(f"Read {path}: {data.shape[1]} channels, {data.shape[0]} samples")
    return AudioClip(data.T, sample_rate)


def wav_info(path: str):
    """Заголовок WAV: (каналы, отсчёты, частота дискретизации)"""
    if not os.path.exists(path):
        raise FormatError(f"WAV file not found: {path}")
    try:
        info = sf.info(path)
    except RuntimeError as e:
        raise FormatError(f"Cannot read WAV {path}: {e}") from e
    return info.channels, info.frames, info.samplerate


def write_wav(path: str, clip: AudioClip, subtype: str = 'FLOAT'):
    """
    Запись WAV

    Args:
        path (str): Путь к файлу
        clip (AudioClip): Сигнал
        subtype (str): 'PCM_16', 'PCM_24' или 'FLOAT'
    """
    if subtype not in SUBTYPES:
        raise FormatError(f"Unsupported WAV subtype {subtype}; use one of {', '.join(SUBTYPES)}")

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    data = clip.samples.T
    if subtype == 'FLOAT':
        # libsndfile пишет в float-файлы PEAK-чанк с меткой времени
        wavfile.write(path, clip.sample_rate, np.ascontiguousarray(data, dtype='<f4'))
    else:
        peak = float(np.max(np.abs(data))) if data.size else 0.0
        if peak > 1.0:
            logger.warning(f"{path}: peak {peak:.3f} exceeds full scale, samples will clip")
        sf.write(path, np.clip(data, -1.0, 1.0), clip.sample_rate, subtype=subtype)

    logger.debug(f"Wrote {path} ({subtype}, {clip.channels} channels)")
