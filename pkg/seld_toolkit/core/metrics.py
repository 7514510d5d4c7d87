"""
Метрики SELD: ER/F с порогом 20 градусов, LE/LR по классам, SELD score,
DoA-метрики ACC/MDR/MAE и сегментная F-macro
"""
import logging
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .assign import hungarian
from .geometry import angular_distance_matrix, normalize
from .trackwise import ClipLabels, EventInstance, collapse_tracks
from ..utils.exceptions import ShapeError, UndefinedMetricError

logger = logging.getLogger(__name__)

DOA_THRESHOLD_DEG = 20.0
SEGMENT_FRAMES = 10
WORST_LE_DEG = 180.0

# Кадр: {class_id: массив направлений (n, 3)}
FrameEvents = List[Dict[int, np.ndarray]]


@dataclass
class Match:
    class_id: int
    ref_index: int
    pred_index: int
    angle: float
    within_threshold: bool


def labels_to_frame_events(labels: ClipLabels) -> FrameEvents:
    """Активные (класс, направление) по кадрам из трековых меток"""
    ids = labels.class_ids()
    frames = []
    for t in range(labels.n_frames):
        frame = {}
        for k in np.flatnonzero(ids[:, t] >= 0):
            frame.setdefault(int(ids[k, t]), []).append(normalize(labels.doa[k, t]))
        frames.append({c: np.array(v) for c, v in frame.items()})
    return frames


def events_to_frame_events(events: Sequence[EventInstance], n_frames: int) -> FrameEvents:
    """Активные (класс, направление) по кадрам из списка событий"""
    frames = [{} for _ in range(n_frames)]
    for event in events:
        if event.offset_frame > n_frames:
            raise ShapeError(f"Event ends at frame {event.offset_frame}, clip has {n_frames}")
        for i, t in enumerate(range(event.onset_frame, event.offset_frame)):
            frames[t].setdefault(event.class_id, []).append(event.directions[i])
    return [{c: np.array(v) for c, v in frame.items()} for frame in frames]


def _as_frame_events(value: Union[ClipLabels, FrameEvents]) -> FrameEvents:
    if isinstance(value, ClipLabels):
        return labels_to_frame_events(value)
    return list(value)


def match_events(pred_frame: Dict[int, np.ndarray], ref_frame: Dict[int, np.ndarray],
                 threshold: float = DOA_THRESHOLD_DEG) -> List[Match]:
    """
    Сопоставление предсказаний и эталонов одного кадра

    Внутри каждого класса - венгерский алгоритм по угловому расстоянию;
    все пары идут в LE/LR, в TP - только пары не дальше threshold.
    """
    matches = []
    for class_id in sorted(set(pred_frame) & set(ref_frame)):
        refs, preds = ref_frame[class_id], pred_frame[class_id]
        if len(refs) == 0 or len(preds) == 0:
            continue
        angles = angular_distance_matrix(refs, preds)
        assignment, _ = hungarian(angles)
        for r, p in enumerate(assignment):
            if p < 0:
                continue
            angle = float(angles[r, p])
            matches.append(Match(class_id, r, int(p), angle, angle <= threshold))
    return matches


@dataclass
class MetricsReport:
    """Отчёт метрик; DoA-метрики и F-macro заполняются, если посчитаны"""
    er20: float
    f20: float
    le_cd: Optional[float]
    lr_cd: float
    seld_score: float
    acc: Optional[float] = None
    mdr: Optional[float] = None
    mae: Optional[float] = None
    f_macro: Optional[float] = None

    @staticmethod
    def csv_header() -> str:
        return 'er20,f20,le_cd,lr_cd,seld_score,acc,mdr,mae,f_macro'

    def _formatted(self) -> List[Tuple[str, str]]:
        return [(name, 'nan' if value is None else f"{value:.6f}") for name, value in asdict(self).items()]

    def to_key_value(self) -> str:
        return ''.join(f"{name}={value}\n" for name, value in self._formatted())

    def to_csv_row(self) -> str:
        return ','.join(value for _, value in self._formatted())


def seld_score(er: float, f_pct: float, le_deg: Optional[float], lr_pct: float) -> float:
    """(ER + (1 - F/100) + LE/180 + (1 - LR/100)) / 4; неопределённая LE считается 180"""
    le = WORST_LE_DEG if le_deg is None else le_deg
    return (er + (1.0 - f_pct / 100.0) + le / 180.0 + (1.0 - lr_pct / 100.0)) / 4.0


@dataclass
class SeldCounts:
    """Счётчики, из которых складываются метрики; клипы сводятся сложением"""
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0
    n_ref: int = 0
    le_sum: float = 0.0
    le_count: int = 0

    @classmethod
    def zeros(cls, n_class: int) -> 'SeldCounts':
        return cls(np.zeros(n_class, dtype=int), np.zeros(n_class, dtype=int), np.zeros(n_class, dtype=int))

    def __add__(self, other: 'SeldCounts') -> 'SeldCounts':
        if self.tp.shape != other.tp.shape:
            raise ShapeError(f"Cannot add counts over {self.tp.size} and {other.tp.size} classes")
        return SeldCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn,
                          self.substitutions + other.substitutions,
                          self.deletions + other.deletions,
                          self.insertions + other.insertions,
                          self.n_ref + other.n_ref,
                          self.le_sum + other.le_sum,
                          self.le_count + other.le_count)

    def to_report(self) -> MetricsReport:
        if self.n_ref == 0:
            raise UndefinedMetricError("no references")

        er = (self.substitutions + self.deletions + self.insertions) / self.n_ref

        active = (self.tp + self.fp + self.fn) > 0
        f_per_class = 2 * self.tp[active] / (2 * self.tp[active] + self.fp[active] + self.fn[active])
        f = 100.0 * float(np.mean(f_per_class))

        le = self.le_sum / self.le_count if self.le_count else None
        lr = 100.0 * self.le_count / self.n_ref
        return MetricsReport(er20=er, f20=f, le_cd=le, lr_cd=lr, seld_score=seld_score(er, f, le, lr))


def seld_counts(pred: Union[ClipLabels, FrameEvents], ref: Union[ClipLabels, FrameEvents],
                n_class: int, threshold: float = DOA_THRESHOLD_DEG,
                segment_frames: int = SEGMENT_FRAMES) -> SeldCounts:
    """
    Счётчики одного клипа

    На кадр и класс: TP - пары не дальше порога, FP = n_pred - TP,
    FN = n_ref - TP. Замены/пропуски/вставки считаются по сегментам
    segment_frames кадров из суммарных FN и FP.
    """
    pred_frames, ref_frames = _as_frame_events(pred), _as_frame_events(ref)
    if len(pred_frames) != len(ref_frames):
        raise ShapeError(f"Prediction has {len(pred_frames)} frames, reference has {len(ref_frames)}")

    counts = SeldCounts.zeros(n_class)
    for start in range(0, len(ref_frames), segment_frames):
        segment_fn = segment_fp = 0
        for t in range(start, min(start + segment_frames, len(ref_frames))):
            matches = match_events(pred_frames[t], ref_frames[t], threshold)
            for class_id in set(pred_frames[t]) | set(ref_frames[t]):
                n_pred = len(pred_frames[t].get(class_id, ()))
                n_ref = len(ref_frames[t].get(class_id, ()))
                tp = sum(1 for m in matches if m.class_id == class_id and m.within_threshold)
                counts.tp[class_id] += tp
                counts.fp[class_id] += n_pred - tp
                counts.fn[class_id] += n_ref - tp
                counts.n_ref += n_ref
                segment_fp += n_pred - tp
                segment_fn += n_ref - tp
            for m in matches:
                counts.le_sum += m.angle
                counts.le_count += 1

        counts.substitutions += min(segment_fn, segment_fp)
        counts.deletions += max(0, segment_fn - segment_fp)
        counts.insertions += max(0, segment_fp - segment_fn)
    return counts


def compute_seld_metrics(pred: Union[ClipLabels, FrameEvents], ref: Union[ClipLabels, FrameEvents],
                         n_class: int = None, threshold: float = DOA_THRESHOLD_DEG,
                         segment_frames: int = SEGMENT_FRAMES) -> MetricsReport:
    """
    ER/F (порог threshold), LE/LR по классам и SELD score одного клипа

    Args:
        pred: Предсказание (трековые метки или события по кадрам)
        ref: Эталон
        n_class (int): Количество классов (по умолчанию из меток)
        threshold (float): Порог угловой ошибки, градусы
        segment_frames (int): Кадров в сегменте для ER

    Returns:
        MetricsReport: Метрики
    """
    if n_class is None:
        if not isinstance(ref, ClipLabels):
            raise ShapeError("n_class is required for per-frame event inputs")
        n_class = ref.n_class
    return seld_counts(pred, ref, n_class, threshold, segment_frames).to_report()


def evaluate_clips(pairs: Iterable[Tuple[Union[ClipLabels, FrameEvents], Union[ClipLabels, FrameEvents]]],
                   n_class: int, threshold: float = DOA_THRESHOLD_DEG,
                   segment_frames: int = SEGMENT_FRAMES) -> MetricsReport:
    """Метрики по набору клипов: счётчики суммируются, затем считается отчёт"""
    total = SeldCounts.zeros(n_class)
    for pred, ref in pairs:
        total = total + seld_counts(pred, ref, n_class, threshold, segment_frames)
    return total.to_report()


@dataclass
class DoaMetrics:
    acc: float
    mdr: float
    mae: Optional[float]


def _all_directions(frame: Dict[int, np.ndarray]) -> np.ndarray:
    arrays = [np.atleast_2d(v) for v in frame.values() if len(v)]
    return np.concatenate(arrays) if arrays else np.zeros((0, 3))


def doa_metrics(pred: Union[ClipLabels, FrameEvents], ref: Union[ClipLabels, FrameEvents],
                threshold: float = DOA_THRESHOLD_DEG) -> DoaMetrics:
    """
    ACC/MDR/MAE без учёта классов

    ACC - доля эталонов с парой не дальше порога, MDR - доля эталонов без пары,
    MAE - средняя угловая ошибка по всем парам.
    """
    pred_frames, ref_frames = _as_frame_events(pred), _as_frame_events(ref)
    if len(pred_frames) != len(ref_frames):
        raise ShapeError(f"Prediction has {len(pred_frames)} frames, reference has {len(ref_frames)}")

    n_ref = within = matched = 0
    error_sum = 0.0
    for pred_frame, ref_frame in zip(pred_frames, ref_frames):
        refs, preds = _all_directions(ref_frame), _all_directions(pred_frame)
        n_ref += len(refs)
        if len(refs) == 0 or len(preds) == 0:
            continue
        angles = angular_distance_matrix(refs, preds)
        assignment, _ = hungarian(angles)
        for r, p in enumerate(assignment):
            if p < 0:
                continue
            matched += 1
            error_sum += float(angles[r, p])
            within += int(angles[r, p] <= threshold)

    if n_ref == 0:
        raise UndefinedMetricError("no references")
    return DoaMetrics(acc=100.0 * within / n_ref,
                      mdr=100.0 * (n_ref - matched) / n_ref,
                      mae=error_sum / matched if matched else None)


def segment_f_macro(pred: Union[ClipLabels, np.ndarray], ref: Union[ClipLabels, np.ndarray],
                    segment_frames: int = 1, threshold: float = 0.5) -> float:
    """
    Сегментная F1, усреднённая по классам, присутствующим в эталоне

    Трековые метки сначала сворачиваются максимумом по трекам.

    Args:
        pred: Поклассовая активность (T', C) или трековые метки
        ref: Эталон того же вида
        segment_frames (int): Кадров меток в сегменте (1 = 100 мс)
        threshold (float): Порог активности

    Returns:
        float: F-macro в [0, 1]
    """
    pred_activity = collapse_tracks(pred) if isinstance(pred, ClipLabels) else np.asarray(pred)
    ref_activity = collapse_tracks(ref) if isinstance(ref, ClipLabels) else np.asarray(ref)
    if pred_activity.shape != ref_activity.shape:
        raise ShapeError(f"Prediction {pred_activity.shape} and reference {ref_activity.shape} differ")

    n_frames, n_class = ref_activity.shape
    n_segments = -(-n_frames // segment_frames)

    def segments(activity):
        padded = np.zeros((n_segments * segment_frames, n_class), dtype=bool)
        padded[:n_frames] = activity >= threshold
        return padded.reshape(n_segments, segment_frames, n_class).any(axis=1)

    p, r = segments(pred_activity), segments(ref_activity)
    present = r.any(axis=0)
    if not present.any():
        raise UndefinedMetricError("no reference classes")

    tp = np.sum(p & r, axis=0)
    fp = np.sum(p & ~r, axis=0)
    fn = np.sum(~p & r, axis=0)
    f1 = 2 * tp[present] / (2 * tp[present] + fp[present] + fn[present])
    return float(np.mean(f1))


def relative_improvement(baseline_score: float, score: float) -> float:
    """Снижение SELD score относительно базовой системы, %"""
    if baseline_score <= 0:
        raise UndefinedMetricError(f"Baseline score must be positive, got {baseline_score}")
    return 100.0 * (baseline_score - score) / baseline_score


def full_report(pred: ClipLabels, ref: ClipLabels, threshold: float = DOA_THRESHOLD_DEG,
                segment_frames: int = SEGMENT_FRAMES) -> MetricsReport:
    """SELD-метрики, дополненные ACC/MDR/MAE и сегментной F-macro"""
    report = compute_seld_metrics(pred, ref, ref.n_class, threshold, segment_frames)
    doa = doa_metrics(pred, ref, threshold)
    report.acc, report.mdr, report.mae = doa.acc, doa.mdr, doa.mae
    try:
        report.f_macro = segment_f_macro(pred, ref)
    except UndefinedMetricError:
        report.f_macro = None
    logger.info(f"SELD score {report.seld_score:.4f} (ER {report.er20:.3f}, F {report.f20:.1f}%)")
    return report
