"""
Оценка направления прихода по векторам интенсивности (оракул вместо DoA-сети)
"""
import logging
import math

import numpy as np

from .dsp import FeatureTensor
from .geometry import angular_distance_matrix, normalize
from .trackwise import CLIP_FRAMES, DEFAULT_CLASSES, ClipLabels
from ..utils.exceptions import ShapeError

logger = logging.getLogger(__name__)

DEFAULT_ACTIVITY_THRESHOLD_DB = -40.0
FRAMES_PER_LABEL = 5
# Выше пола log-mel (1e-10): тишина не проходит порог
ENERGY_FLOOR = 1e-8


def estimate_doa_iv(ivs: FeatureTensor,
                    logmels: FeatureTensor,
                    activity_threshold_db: float = DEFAULT_ACTIVITY_THRESHOLD_DB,
                    frames_per_label: int = FRAMES_PER_LABEL,
                    class_id: int = 0,
                    n_labels: int = None,
                    n_class: int = DEFAULT_CLASSES) -> ClipLabels:
    """
    Одно-трековая оценка направления по кадрам меток

    Полоса участвует, если её энергия (по каналу W) не ниже порога относительно
    пика клипа. Направление кадра меток - среднее IV по участвующим полосам и
    кадрам STFT с весом по энергии, нормированное к единичной длине.

    Args:
        ivs (FeatureTensor): Векторы интенсивности (3, T, B)
        logmels (FeatureTensor): Log-mel FoA (первый канал - W)
        activity_threshold_db (float): Порог относительно пика, дБ
        frames_per_label (int): Кадров STFT в кадре меток
        class_id (int): Класс, которым помечаются активные кадры
        n_labels (int): Количество кадров меток (по умолчанию ceil(T / frames_per_label))
        n_class (int): Количество классов

    Returns:
        ClipLabels: Метки с одним треком
    """
    if ivs.values.shape[0] != 3:
        raise ShapeError(f"Expected 3 IV channels, got {ivs.values.shape[0]}")
    if ivs.values.shape[1:] != logmels.values.shape[1:]:
        raise ShapeError(f"IV {ivs.values.shape[1:]} and log-mel {logmels.values.shape[1:]} are not aligned")

    n_frames = ivs.values.shape[1]
    if n_labels is None:
        n_labels = math.ceil(n_frames / frames_per_label)

    energy = np.exp(logmels.values[0])
    peak = float(energy.max()) if energy.size else 0.0
    threshold = max(peak * 10.0 ** (activity_threshold_db / 10.0), ENERGY_FLOOR)
    weights = np.where(energy >= threshold, energy, 0.0)

    labels = ClipLabels.empty(1, n_labels, n_class)
    for label in range(n_labels):
        span = slice(label * frames_per_label, min((label + 1) * frames_per_label, n_frames))
        w = weights[span]
        if not np.any(w > 0):
            continue
        direction = np.einsum('ctb,tb->c', ivs.values[:, span], w) / w.sum()
        norm = np.linalg.norm(direction)
        if norm <= 0:
            continue
        labels.doa[0, label] = direction / norm
        labels.sed[0, label, class_id] = 1.0

    logger.debug(f"Oracle DoA: {int(labels.active_mask().sum())}/{n_labels} active label frames")
    return labels


def _nearest_reference(ref: ClipLabels, ref_active: np.ndarray, ref_ids: np.ndarray,
                       direction: np.ndarray, t: int):
    """(трек, класс) ближайшего по углу эталона в ближайшем по времени активном кадре"""
    frames = np.flatnonzero(ref_active.any(axis=0))
    if frames.size == 0:
        return None
    nearest = int(frames[np.argmin(np.abs(frames - t))])
    tracks = np.flatnonzero(ref_active[:, nearest])
    angles = angular_distance_matrix(direction, ref.doa[tracks, nearest])[0]
    track = int(tracks[int(np.argmin(angles))])
    return track, int(ref_ids[track, nearest])


def _place(result_ids: np.ndarray, ref_ids: np.ndarray, t: int, class_id: int, preferred: int,
           clip_frames: int):
    """Трек для кадра t: свободен в кадре и не несёт другого класса в клипе"""
    start = (t // clip_frames) * clip_frames
    clip = slice(start, start + clip_frames)
    candidates = [preferred] + [k for k in range(result_ids.shape[0]) if k != preferred]
    for k in candidates:
        if result_ids[k, t] >= 0:
            continue
        hosted = set(result_ids[k, clip].tolist()) | set(ref_ids[k, clip].tolist())
        hosted.discard(-1)
        if hosted <= {class_id}:
            return k
    return None


def assign_oracle_classes(pred: ClipLabels, ref: ClipLabels, clip_frames: int = CLIP_FRAMES) -> ClipLabels:
    """
    Перенос активных кадров оракула на треки эталона

    Каждый активный кадр предсказания помечается классом ближайшего по углу
    активного эталонного трека и кладётся на этот же трек. Кадры, где эталон
    молчит, остаются в предсказании (это ложные срабатывания): они берут трек и
    класс ближайшего по времени эталонного события, без эталона - собственный класс.
    Занятый трек заменяется свободным, не несущим в клипе другого класса.

    Args:
        pred (ClipLabels): Одно-трековое предсказание
        ref (ClipLabels): Трековый эталон
        clip_frames (int): Кадров меток в клипе

    Returns:
        ClipLabels: Предсказание с треками и классами эталона
    """
    if pred.n_frames != ref.n_frames:
        raise ShapeError(f"Prediction has {pred.n_frames} frames, reference has {ref.n_frames}")
    if pred.n_class != ref.n_class:
        raise ShapeError(f"Prediction has {pred.n_class} classes, reference has {ref.n_class}")

    result = ClipLabels.empty(ref.n_tracks, ref.n_frames, ref.n_class)
    result_ids = np.full((ref.n_tracks, ref.n_frames), -1)
    pred_active = pred.active_mask()
    pred_classes = pred.class_ids()
    ref_active = ref.active_mask()
    ref_ids = ref.class_ids()
    dropped = 0

    for t in range(pred.n_frames):
        tracks = np.flatnonzero(ref_active[:, t])
        for k in np.flatnonzero(pred_active[:, t]):
            direction = normalize(pred.doa[k, t])
            if tracks.size:
                angles = angular_distance_matrix(direction, ref.doa[tracks, t])[0]
                preferred = int(tracks[int(np.argmin(angles))])
                class_id = int(ref_ids[preferred, t])
            else:
                nearest = _nearest_reference(ref, ref_active, ref_ids, direction, t)
                preferred, class_id = nearest if nearest else (0, int(pred_classes[k, t]))
            target = _place(result_ids, ref_ids, t, class_id, preferred, clip_frames)
            if target is None:
                dropped += 1
                continue
            result.sed[target, t, class_id] = 1.0
            result.doa[target, t] = direction
            result_ids[target, t] = class_id

    if dropped:
        logger.warning(f"{dropped} predicted frames did not fit on {ref.n_tracks} tracks and were dropped")
    return result
