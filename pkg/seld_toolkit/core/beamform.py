"""
Трековый delay-and-sum бимформинг по траекториям источников

d_{k,m}(t) = |p_k(t) - p_m|                   (сферический фронт: расстояние источник-капсюль)
d_{k,m}(t) = -(n_k(t) . p_m)                  (плоский фронт: разность хода, n_k = p_k / |p_k|)
s_{k,m}(f,t) = exp(-j 2 pi f d_{k,m}(t) / c)   (вектор управления)
w_k(t) = |p_k(t)| при |p_k(t)| >= 0.5, иначе 0.01
Y_k(f,t) = 1/M sum_m w_k(t) conj(s_{k,m}(f,t)) X_m(f,t)

Модель фронта должна совпадать с моделью, по которой записан сигнал.
"""
import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from .dsp import SpectralTensor
from .scene import SPEED_OF_SOUND, WAVEFRONTS, MicArrayGeometry
from .trackwise import ClipLabels
from ..utils.exceptions import ConfigurationError, ShapeError

logger = logging.getLogger(__name__)

ACTIVE_DISTANCE = 0.5
INACTIVE_WEIGHT = 0.01
FALLBACK_DIRECTION = np.array([1.0, 0.0, 0.0])


@dataclass
class SteeringField:
    """
    Поле управления клипа

    steering: (K, M, T, F) комплексные s_{k,m}(f,t)
    weights: (K, T) весовые коэффициенты w_k(t)
    """
    steering: np.ndarray
    weights: np.ndarray
    speed_of_sound: float = SPEED_OF_SOUND
    wavefront: str = 'plane'

    def __post_init__(self):
        if self.steering.ndim != 4 or self.weights.shape != (self.steering.shape[0], self.steering.shape[2]):
            raise ShapeError(f"Inconsistent steering {self.steering.shape} and weights {self.weights.shape}")
        _check_wavefront(self.wavefront)

    @property
    def n_tracks(self) -> int:
        return self.steering.shape[0]


def _check_wavefront(wavefront: str):
    if wavefront not in WAVEFRONTS:
        raise ConfigurationError(f"Unknown wavefront model: {wavefront}. Supported: {', '.join(WAVEFRONTS)}")


def source_mic_distance(source, mic) -> float:
    """Евклидово расстояние между источником и капсюлем, м"""
    return float(np.linalg.norm(np.asarray(source, dtype=np.float64) - np.asarray(mic, dtype=np.float64)))


def steering_value(frequency, distance, c: float = SPEED_OF_SOUND):
    """exp(-j 2 pi f d / c); транслируется по массивам"""
    if c <= 0:
        raise ConfigurationError(f"Speed of sound must be positive, got {c}")
    return np.exp(-2j * np.pi * np.asarray(frequency) * np.asarray(distance) / c)


def track_weight(source) -> np.ndarray:
    """Вес трека: расстояние источника от центра решётки, либо 0.01 ближе 0.5 м"""
    distance = np.linalg.norm(np.asarray(source, dtype=np.float64), axis=-1)
    weight = np.where(distance >= ACTIVE_DISTANCE, distance, INACTIVE_WEIGHT)
    return weight if weight.ndim else float(weight)


def label_frame_map(n_frames: int, hop_samples: int, label_hop_samples: int, n_labels: int) -> np.ndarray:
    """Кадр STFT -> кадр меток (удержание нулевого порядка)"""
    if n_labels < 1:
        raise ShapeError("Labels have no frames")
    mapping = (np.arange(n_frames) * hop_samples) // label_hop_samples
    return np.minimum(mapping, n_labels - 1)


def _held_positions(positions: np.ndarray) -> np.ndarray:
    """Неактивные кадры (нулевая позиция) держат последнюю известную позицию"""
    held = positions.copy()
    last = FALLBACK_DIRECTION
    for t in range(held.shape[0]):
        if np.any(held[t]):
            last = held[t]
        else:
            held[t] = last
    return held


def steering_distances(positions: np.ndarray, geom: MicArrayGeometry, wavefront: str = 'plane') -> np.ndarray:
    """
    Расстояния d_{k,m}(t) для векторов управления, (M, T)

    Args:
        positions (np.ndarray): Позиции источника по кадрам (T, 3), ненулевые
        geom (MicArrayGeometry): Решётка
        wavefront (str): 'plane' - разность хода -(n . p_m); 'spherical' - |p - p_m|

    Returns:
        np.ndarray: Расстояния, м
    """
    _check_wavefront(wavefront)
    if wavefront == 'plane':
        directions = positions / np.linalg.norm(positions, axis=1, keepdims=True)
        return -(geom.positions @ directions.T)
    return np.linalg.norm(positions[np.newaxis, :, :] - geom.positions[:, np.newaxis, :], axis=2)


def _track_steering(positions: np.ndarray, geom: MicArrayGeometry, frequencies: np.ndarray,
                    c: float, wavefront: str) -> np.ndarray:
    # (M, T, F)
    distances = steering_distances(_held_positions(positions), geom, wavefront)
    return steering_value(frequencies[np.newaxis, np.newaxis, :], distances[:, :, np.newaxis], c)


def _frame_positions(labels: ClipLabels, frame_to_label: np.ndarray) -> np.ndarray:
    if frame_to_label.size and frame_to_label.max() >= labels.n_frames:
        raise ShapeError(f"Frame map points past {labels.n_frames} label frames")
    return labels.doa[:, frame_to_label, :]


def compute_steering_field(labels: ClipLabels, geom: MicArrayGeometry, frequencies: np.ndarray,
                           frame_to_label: np.ndarray, c: float = SPEED_OF_SOUND,
                           wavefront: str = 'plane') -> SteeringField:
    """
    Векторы управления и веса для всех треков

    Args:
        labels (ClipLabels): Траектории (позиции p_k в метрах)
        geom (MicArrayGeometry): Решётка
        frequencies (np.ndarray): Частоты бинов, Гц
        frame_to_label (np.ndarray): Кадр STFT -> кадр меток
        c (float): Скорость звука
        wavefront (str): Модель фронта волны записи ('plane' или 'spherical')

    Returns:
        SteeringField: Поле управления
    """
    _check_wavefront(wavefront)
    positions = _frame_positions(labels, frame_to_label)
    steering = np.stack([_track_steering(positions[k], geom, frequencies, c, wavefront)
                         for k in range(labels.n_tracks)]) if labels.n_tracks else \
        np.zeros((0, geom.channels, len(frame_to_label), len(frequencies)), dtype=np.complex128)
    return SteeringField(steering, np.reshape(track_weight(positions), positions.shape[:2]), c, wavefront)


def apply_steering(spec: SpectralTensor, field: SteeringField) -> SpectralTensor:
    """Y_k = 1/M sum_m w_k conj(s_{k,m}) X_m; результат - K каналов"""
    if field.steering.shape[1:] != spec.coefficients.shape:
        raise ShapeError(f"Steering field {field.steering.shape[1:]} does not match "
                         f"spectrum {spec.coefficients.shape}")
    tracks = np.einsum('kt,kmtf,mtf->ktf', field.weights, np.conj(field.steering),
                       spec.coefficients) / spec.channels
    return spec.with_coefficients(tracks)


def ds_beamform(spec: SpectralTensor, labels: ClipLabels, geom: MicArrayGeometry,
                c: float = SPEED_OF_SOUND, label_hop_s: float = 0.1,
                wavefront: str = 'plane') -> SpectralTensor:
    """
    Бимформинг по каждому треку

    Args:
        spec (SpectralTensor): STFT каналов решётки
        labels (ClipLabels): Трековые траектории
        geom (MicArrayGeometry): Решётка
        c (float): Скорость звука
        label_hop_s (float): Шаг кадров меток
        wavefront (str): Модель фронта волны записи

    Returns:
        SpectralTensor: K каналов Y_k(f, t)
    """
    if spec.channels != geom.channels:
        raise ShapeError(f"Spectrum has {spec.channels} channels, geometry has {geom.channels} capsules")
    _check_wavefront(wavefront)

    frame_to_label = label_frame_map(spec.frames, spec.hop_samples,
                                     int(round(label_hop_s * spec.sample_rate)), labels.n_frames)
    positions = _frame_positions(labels, frame_to_label)
    weights = np.reshape(track_weight(positions), positions.shape[:2])

    # Поле управления строится потрековно
    tracks = np.zeros((labels.n_tracks, spec.frames, spec.bins), dtype=np.complex128)
    for k in range(labels.n_tracks):
        steering = _track_steering(positions[k], geom, spec.frequencies, c, wavefront)
        tracks[k] = weights[k][:, np.newaxis] * np.mean(np.conj(steering) * spec.coefficients, axis=0)

    logger.debug(f"Beamformed {labels.n_tracks} tracks over {spec.frames} frames ({wavefront} wavefront)")
    return spec.with_coefficients(tracks)


@dataclass
class TrackGain:
    """Выигрыш бимформера на треке по активным кадрам"""
    track: int
    active_frames: int
    input_snr_db: float
    output_snr_db: float
    gain_db: float
    noise_suppression_db: float


def _db(ratio: float) -> float:
    return float(10.0 * np.log10(max(ratio, 1e-300)))


def snr_gain_report(signal: SpectralTensor, noise: SpectralTensor, labels: ClipLabels,
                    geom: MicArrayGeometry, c: float = SPEED_OF_SOUND,
                    label_hop_s: float = 0.1, wavefront: str = 'plane') -> List[TrackGain]:
    """
    Отчёт о выигрыше ОСШ по трекам

    Сигнал и шум формируются раздельно (бимформер линеен). Подавление шума -
    отношение входной мощности шума на канал, умноженной на w^2, к выходной.
    """
    if signal.coefficients.shape != noise.coefficients.shape:
        raise ShapeError(f"Signal {signal.coefficients.shape} and noise {noise.coefficients.shape} differ")

    out_signal = ds_beamform(signal, labels, geom, c, label_hop_s, wavefront).coefficients
    out_noise = ds_beamform(noise, labels, geom, c, label_hop_s, wavefront).coefficients

    frame_to_label = label_frame_map(signal.frames, signal.hop_samples,
                                     int(round(label_hop_s * signal.sample_rate)), labels.n_frames)
    active = labels.active_mask()[:, frame_to_label]
    weights = np.reshape(track_weight(labels.doa[:, frame_to_label, :]), active.shape)

    report = []
    for k in range(labels.n_tracks):
        frames = active[k]
        if not frames.any():
            continue
        in_signal = np.mean(np.abs(signal.coefficients[:, frames]) ** 2)
        in_noise = np.mean(np.abs(noise.coefficients[:, frames]) ** 2)
        power_signal = np.mean(np.abs(out_signal[k, frames]) ** 2)
        power_noise = np.mean(np.abs(out_noise[k, frames]) ** 2)
        input_snr = _db(in_signal / in_noise)
        output_snr = _db(power_signal / power_noise)
        w2 = float(np.mean(weights[k, frames] ** 2))
        report.append(TrackGain(track=k,
                                active_frames=int(frames.sum()),
                                input_snr_db=input_snr,
                                output_snr_db=output_snr,
                                gain_db=output_snr - input_snr,
                                noise_suppression_db=_db(in_noise * w2 / power_noise)))
        logger.info(f"Track {k}: SNR {input_snr:.2f} dB -> {output_snr:.2f} dB")
    return report


def format_gain_report(report: List[TrackGain]) -> str:
    """Текстовый отчёт key=value, по строке на трек"""
    if not report:
        return 'tracks=0\n'
    lines = [f"tracks={len(report)}"]
    for item in report:
        lines.append(
            f"track={item.track} active_frames={item.active_frames} "
            f"input_snr_db={item.input_snr_db:.4f} output_snr_db={item.output_snr_db:.4f} "
            f"gain_db={item.gain_db:.4f} noise_suppression_db={item.noise_suppression_db:.4f}"
        )
    return '\n'.join(lines) + '\n'
