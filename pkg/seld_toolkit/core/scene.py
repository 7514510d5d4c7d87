"""
Синтетические пространственные сцены: кодирование в FoA, рендеринг на
тетраэдрическую микрофонную решётку и трековые метки ground truth
"""
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from .dsp import AudioClip, SpectralTensor, DEFAULT_HOP_S, DEFAULT_WINDOW_S, DEFAULT_SAMPLE_RATE, istft, stft
from .geometry import AzEl, azel_to_unit_array, slerp
from .signal_factory import SignalFactory
from .signals import BaseSignal, ClipSignal
from .trackwise import CLIP_FRAMES, DEFAULT_CLASSES, DEFAULT_TRACKS, ClipLabels, EventInstance, reorder_clipwise
from ..utils.exceptions import ConfigurationError, FormatError, TrackOverflowError, ValidationError

logger = logging.getLogger(__name__)

SPEED_OF_SOUND = 343.0
DEFAULT_ARRAY_RADIUS = 0.042
DEFAULT_LABEL_HOP_S = 0.1
WAVEFRONTS = ('plane', 'spherical')

Waypoint = Tuple[float, AzEl]


@dataclass
class EventSpec:
    """Событие сцены: класс, интервал в секундах, траектория и моно-сигнал"""
    class_id: int
    onset: float
    offset: float
    trajectory: List[Waypoint]
    signal: Union[BaseSignal, AudioClip]
    source_id: int = 0

    def __post_init__(self):
        if self.onset < 0:
            raise ValidationError(f"Event onset cannot be negative: {self.onset}")
        if self.onset >= self.offset:
            raise ValidationError(f"Event onset {self.onset} must precede offset {self.offset}")
        if not self.trajectory:
            raise ValidationError("Event trajectory needs at least one waypoint")

        times = [t for t, _ in self.trajectory]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError(f"Trajectory times must strictly increase: {times}")
        # Одна точка - неподвижный источник
        if len(times) > 1 and (times[0] > self.onset + 1e-9 or times[-1] < self.offset - 1e-9):
            raise ValidationError(
                f"Trajectory [{times[0]}, {times[-1]}] does not cover event [{self.onset}, {self.offset}]"
            )

        if isinstance(self.signal, AudioClip):
            if self.signal.channels != 1:
                raise FormatError(f"Event signal must be mono, got {self.signal.channels} channels")
            self.signal = ClipSignal(samples=self.signal.samples[0])
        elif not isinstance(self.signal, BaseSignal):
            raise ConfigurationError(f"Unsupported event signal: {self.signal!r}")

    def directions_at(self, times: np.ndarray) -> np.ndarray:
        """Направления (len(times), 3) по траектории; вне опорных точек - ближайший конец"""
        times = np.asarray(times, dtype=np.float64)
        anchors = np.array([t for t, _ in self.trajectory])
        vectors = azel_to_unit_array([a.azimuth for _, a in self.trajectory],
                                     [a.elevation for _, a in self.trajectory])
        if len(anchors) == 1:
            return np.tile(vectors[0], (times.size, 1))

        segment = np.clip(np.searchsorted(anchors, times, side='right') - 1, 0, len(anchors) - 2)
        span = anchors[segment + 1] - anchors[segment]
        fraction = np.clip((times - anchors[segment]) / span, 0.0, 1.0)
        return slerp(vectors[segment], vectors[segment + 1], fraction)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: str = '') -> 'EventSpec':
        if 'trajectory' in data:
            trajectory = [(float(p.get('time', 0.0)), AzEl(float(p['azimuth']), float(p['elevation'])))
                          for p in data['trajectory']]
        elif 'direction' in data:
            d = data['direction']
            trajectory = [(float(data['onset']), AzEl(float(d['azimuth']), float(d['elevation'])))]
        else:
            raise ConfigurationError("Event needs 'trajectory' or 'direction'")

        signal_config = dict(data.get('signal', {'type': 'noise'}))
        signal_type = signal_config.pop('type', 'noise')
        if signal_type == 'clip' and signal_config.get('path') and base_dir:
            signal_config['path'] = os.path.join(base_dir, signal_config['path'])
        signal = SignalFactory.create(signal_type, signal_config)

        return cls(class_id=int(data['class_id']),
                   onset=float(data['onset']),
                   offset=float(data['offset']),
                   trajectory=trajectory,
                   signal=signal,
                   source_id=int(data.get('source_id', 0)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'class_id': self.class_id,
            'source_id': self.source_id,
            'onset': self.onset,
            'offset': self.offset,
            'trajectory': [{'time': t, 'azimuth': a.azimuth, 'elevation': a.elevation}
                           for t, a in self.trajectory],
            'signal': self.signal.describe(),
        }


@dataclass
class SceneConfig:
    """Описание сцены"""
    duration: float
    events: List[EventSpec] = field(default_factory=list)
    noise_snr_db: Optional[float] = None
    array_radius: float = DEFAULT_ARRAY_RADIUS
    seed: int = 0
    sample_rate: int = DEFAULT_SAMPLE_RATE
    n_class: int = DEFAULT_CLASSES

    def __post_init__(self):
        if self.duration <= 0:
            raise ValidationError(f"Scene duration must be positive, got {self.duration}")
        if self.array_radius <= 0:
            raise ValidationError(f"Array radius must be positive, got {self.array_radius}")
        for event in self.events:
            if not 0 <= event.class_id < self.n_class:
                raise ValidationError(f"Event class {event.class_id} outside [0, {self.n_class})")

    @property
    def num_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: str = '') -> 'SceneConfig':
        try:
            events = [EventSpec.from_dict(e, base_dir) for e in data.get('events', [])]
            return cls(duration=float(data['duration']),
                       events=events,
                       noise_snr_db=None if data.get('noise_snr_db') is None else float(data['noise_snr_db']),
                       array_radius=float(data.get('array_radius', DEFAULT_ARRAY_RADIUS)),
                       seed=int(data.get('seed', 0)),
                       sample_rate=int(data.get('sample_rate', DEFAULT_SAMPLE_RATE)),
                       n_class=int(data.get('n_class', DEFAULT_CLASSES)))
        except KeyError as e:
            raise ConfigurationError(f"Scene config is missing required field {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        return {
            'duration': self.duration,
            'sample_rate': self.sample_rate,
            'noise_snr_db': self.noise_snr_db,
            'array_radius': self.array_radius,
            'seed': self.seed,
            'n_class': self.n_class,
            'events': [e.to_dict() for e in self.events],
        }


def load_scene_config(path: str) -> SceneConfig:
    """
    Загрузка сцены из JSON или YAML

    Пути к WAV-сигналам событий разрешаются относительно файла сцены.
    """
    if not os.path.exists(path):
        raise ConfigurationError(f"Scene config not found: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f) if path.endswith('.json') else yaml.safe_load(f)
    except (OSError, ValueError, yaml.YAMLError) as e:
        raise ConfigurationError(f"Error loading scene from {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"Scene root must be a mapping: {path}")

    scene = SceneConfig.from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))
    logger.info(f"Loaded scene from {path}: {len(scene.events)} events, {scene.duration} s")
    return scene


@dataclass
class MicArrayGeometry:
    """Положения капсюлей (M, 3) в метрах относительно центра решётки"""
    positions: np.ndarray

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=np.float64)
        if positions.ndim != 2 or positions.shape[1] != 3 or positions.shape[0] < 1:
            raise ConfigurationError(f"Mic positions must have shape (M >= 1, 3), got {positions.shape}")
        self.positions = positions

    @classmethod
    def tetrahedral(cls, radius: float = DEFAULT_ARRAY_RADIUS) -> 'MicArrayGeometry':
        """Тетраэдр: капсюли в (az, el) = (45, 35.3), (-45, -35.3), (135, -35.3), (-135, 35.3)"""
        vertices = np.array([[1.0, 1.0, 1.0],
                             [1.0, -1.0, -1.0],
                             [-1.0, 1.0, -1.0],
                             [-1.0, -1.0, 1.0]]) / math.sqrt(3.0)
        return cls(radius * vertices)

    @property
    def channels(self) -> int:
        return self.positions.shape[0]


def scene_warnings(scene: SceneConfig) -> List[str]:
    """Предупреждения о событиях, выходящих за длительность сцены"""
    messages = []
    for index, event in enumerate(scene.events):
        if event.onset >= scene.duration:
            messages.append(f"event #{index} (class {event.class_id}) starts at {event.onset} s, "
                            f"after the scene end ({scene.duration} s); dropped")
        elif event.offset > scene.duration:
            messages.append(f"event #{index} (class {event.class_id}) ends at {event.offset} s, "
                            f"clipped to {scene.duration} s")
    return messages


def _event_rngs(scene: SceneConfig) -> Tuple[List[np.random.Generator], np.random.Generator]:
    children = np.random.SeedSequence(scene.seed).spawn(len(scene.events) + 1)
    return [np.random.default_rng(s) for s in children[:-1]], np.random.default_rng(children[-1])


def _render_events(scene: SceneConfig):
    """Моно-сигналы событий, обрезанные по длительности: (event, start, samples)"""
    for message in scene_warnings(scene):
        logger.warning(message)

    rngs, _ = _event_rngs(scene)
    total = scene.num_samples
    rendered = []
    for event, rng in zip(scene.events, rngs):
        start = int(round(event.onset * scene.sample_rate))
        stop = int(round(event.offset * scene.sample_rate))
        samples = event.signal.render(stop - start, scene.sample_rate, rng)
        samples = np.asarray(samples, dtype=np.float64)[:max(0, total - start)]
        if samples.size:
            rendered.append((event, start, samples))
    return rendered


def diffuse_noise(num_channels: int, num_samples: int, power: float,
                  rng: np.random.Generator) -> np.ndarray:
    """
    Независимый белый шум по каналам с точной эмпирической мощностью

    Returns:
        np.ndarray: (num_channels, num_samples)
    """
    noise = rng.standard_normal((num_channels, num_samples))
    measured = np.mean(noise ** 2, axis=1, keepdims=True)
    return noise * np.sqrt(power / np.maximum(measured, 1e-300))


def _add_noise(scene: SceneConfig, mix: np.ndarray, reference_power: float) -> np.ndarray:
    if scene.noise_snr_db is None:
        return mix
    if reference_power <= 0.0:
        logger.warning("Scene has no signal energy; noise at the requested SNR is undefined, skipped")
        return mix
    _, rng = _event_rngs(scene)
    power = reference_power / 10.0 ** (scene.noise_snr_db / 10.0)
    return mix + diffuse_noise(mix.shape[0], mix.shape[1], power, rng)


def encode_foa(scene: SceneConfig) -> AudioClip:
    """
    Кодирование сцены в FoA (ACN/SN3D, W с единичным усилением)

    W = s, X = s cos(el) cos(az), Y = s cos(el) sin(az), Z = s sin(el),
    направление интерполируется по траектории в каждом отсчёте.

    Args:
        scene (SceneConfig): Сцена

    Returns:
        AudioClip: 4 канала (W, X, Y, Z)
    """
    mix = np.zeros((4, scene.num_samples))
    for event, start, samples in _render_events(scene):
        times = (start + np.arange(samples.size)) / scene.sample_rate
        directions = event.directions_at(times)
        span = slice(start, start + samples.size)
        mix[0, span] += samples
        mix[1:4, span] += samples[np.newaxis, :] * directions.T

    mix = _add_noise(scene, mix, float(np.mean(mix[0] ** 2)))
    logger.info(f"Encoded {len(scene.events)} events into FoA ({scene.duration} s)")
    return AudioClip(mix, scene.sample_rate)


def capsule_delays(directions: np.ndarray, geom: MicArrayGeometry,
                   c: float = SPEED_OF_SOUND, wavefront: str = 'plane',
                   source_distance: float = 1.0) -> np.ndarray:
    """
    Задержки капсюлей относительно центра решётки, (T, M) секунд

    plane: tau_m = -(p_m . n) / c
    spherical: tau_m = (|r n - p_m| - r) / c для источника на расстоянии r
    """
    n = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    if wavefront == 'plane':
        return -(n @ geom.positions.T) / c
    if wavefront == 'spherical':
        if source_distance <= 0:
            raise ConfigurationError(f"Source distance must be positive, got {source_distance}")
        source = source_distance * n
        distances = np.linalg.norm(source[:, np.newaxis, :] - geom.positions[np.newaxis], axis=2)
        return (distances - source_distance) / c
    raise ConfigurationError(f"Unknown wavefront model: {wavefront}. Supported: {', '.join(WAVEFRONTS)}")


def propagate_spectrum(spec: SpectralTensor, directions: np.ndarray, geom: MicArrayGeometry,
                       c: float = SPEED_OF_SOUND, wavefront: str = 'plane',
                       source_distance: float = 1.0) -> SpectralTensor:
    """
    Фазовый сдвиг моно-спектра на капсюли решётки по кадрам

    Args:
        spec (SpectralTensor): Одноканальный STFT источника
        directions (np.ndarray): Направление источника в каждом кадре (T, 3)
        geom (MicArrayGeometry): Геометрия решётки

    Returns:
        SpectralTensor: M каналов, X_m = S * exp(-j 2 pi f tau_m(t))
    """
    if spec.channels != 1:
        raise ConfigurationError(f"Expected a mono spectrum, got {spec.channels} channels")
    directions = np.atleast_2d(directions)
    if directions.shape != (spec.frames, 3):
        raise ConfigurationError(f"Expected {spec.frames} frame directions, got {directions.shape}")

    delays = capsule_delays(directions, geom, c, wavefront, source_distance)
    phase = np.exp(-2j * np.pi * spec.frequencies[np.newaxis, np.newaxis, :]
                   * delays.T[:, :, np.newaxis])
    return spec.with_coefficients(phase * spec.coefficients)


def render_micarray(scene: SceneConfig,
                    geom: MicArrayGeometry = None,
                    c: float = SPEED_OF_SOUND,
                    window_s: float = DEFAULT_WINDOW_S,
                    hop_s: float = DEFAULT_HOP_S,
                    wavefront: str = 'plane',
                    source_distance: float = 1.0) -> AudioClip:
    """
    Рендеринг сцены на микрофонную решётку

    Каждое событие задерживается на tau_m(t) фазовым сдвигом в каждом кадре STFT
    (направление - по траектории в центре кадра), затем синтез перекрытием со сложением.

    Args:
        scene (SceneConfig): Сцена
        geom (MicArrayGeometry): Решётка (по умолчанию тетраэдр радиуса scene.array_radius)
        c (float): Скорость звука, м/с
        wavefront (str): 'plane' или 'spherical'
        source_distance (float): Расстояние до источника для 'spherical'

    Returns:
        AudioClip: M каналов
    """
    if geom is None:
        geom = MicArrayGeometry.tetrahedral(scene.array_radius)
    if wavefront not in WAVEFRONTS:
        raise ConfigurationError(f"Unknown wavefront model: {wavefront}. Supported: {', '.join(WAVEFRONTS)}")

    sr = scene.sample_rate
    hop = int(round(hop_s * sr))
    total = scene.num_samples
    mix = np.zeros((geom.channels, total))

    for event, start, samples in _render_events(scene):
        # Поля по 2 * hop с краёв: внутри [hop, len - hop) сумма окон постоянна
        pad = 2 * hop
        tail = pad + (-samples.size) % hop
        padded = np.concatenate([np.zeros(pad), samples, np.zeros(tail)])
        spec = stft(AudioClip(padded, sr), window_s, hop_s)

        centers = start - pad + np.arange(spec.frames) * hop + spec.window_samples / 2.0
        directions = event.directions_at(centers / sr)
        rendered = istft(propagate_spectrum(spec, directions, geom, c, wavefront, source_distance))

        kept = rendered.samples[:, hop:padded.size - hop]
        first = start - pad + hop
        lo, hi = max(first, 0), min(first + kept.shape[1], total)
        if hi > lo:
            mix[:, lo:hi] += kept[:, lo - first:hi - first]

    reference = float(np.mean(mix ** 2)) if mix.size else 0.0
    mix = _add_noise(scene, mix, reference)
    logger.info(f"Rendered {len(scene.events)} events on {geom.channels} capsules ({wavefront} wavefront)")
    return AudioClip(mix, sr)


def _frame_span(onset: float, offset: float, label_hop_s: float, n_frames: int) -> Tuple[int, int]:
    # Кадр t активен, если его центр (t + 0.5) * hop попадает в [onset, offset)
    first = math.ceil(onset / label_hop_s - 0.5 - 1e-9)
    last = math.ceil(offset / label_hop_s - 0.5 - 1e-9)
    return max(first, 0), min(last, n_frames)


def scene_events(scene: SceneConfig, label_hop_s: float = DEFAULT_LABEL_HOP_S) -> List[EventInstance]:
    """События сцены в кадрах меток; направления - в центрах кадров"""
    n_frames = math.ceil(scene.duration / label_hop_s - 1e-9)
    instances = []
    for index, event in enumerate(scene.events):
        onset, offset = _frame_span(event.onset, min(event.offset, scene.duration), label_hop_s, n_frames)
        if onset >= offset:
            logger.debug(f"Event #{index} is shorter than one label frame, no labels emitted")
            continue
        centers = (np.arange(onset, offset) + 0.5) * label_hop_s
        instances.append(EventInstance(event.class_id, onset, offset,
                                       event.directions_at(centers), source_id=event.source_id))
    return instances


def ground_truth_labels(scene: SceneConfig,
                        label_hop_s: float = DEFAULT_LABEL_HOP_S,
                        n_tracks: int = DEFAULT_TRACKS,
                        clip_frames: int = CLIP_FRAMES) -> ClipLabels:
    """
    Трековые метки сцены

    Args:
        scene (SceneConfig): Сцена
        label_hop_s (float): Шаг кадра меток
        n_tracks (int): Количество треков K
        clip_frames (int): Область переупорядочивания (кадров в клипе)

    Returns:
        ClipLabels: Метки (K, T')
    """
    n_frames = math.ceil(scene.duration / label_hop_s - 1e-9)
    events = scene_events(scene, label_hop_s)

    concurrency = np.zeros(n_frames, dtype=int)
    for event in events:
        concurrency[event.onset_frame:event.offset_frame] += 1
    overflow = np.flatnonzero(concurrency > n_tracks)
    if overflow.size:
        frame = int(overflow[0])
        raise TrackOverflowError(
            f"{concurrency[frame]} concurrent events at label frame {frame} exceed {n_tracks} tracks",
            frame=frame,
        )

    return reorder_clipwise(events, n_tracks, n_frames, scene.n_class, clip_frames)
