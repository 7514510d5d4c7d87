"""
Трековый формат меток: переупорядочивание событий по трекам, свёртка треков
в поклассовую активность и чтение/запись метаданных DCASE (CSV)
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .geometry import NORM_TOLERANCE, azel_to_unit_array, normalize, unit_to_azel_array
from ..utils.exceptions import (
    InvariantError, ParseError, RangeError, ShapeError, TrackOverflowError, ValidationError,
)

logger = logging.getLogger(__name__)

DEFAULT_TRACKS = 6
DEFAULT_CLASSES = 13
CLIP_FRAMES = 50
ACTIVITY_THRESHOLD = 0.5


@dataclass
class EventInstance:
    """Одно событие в кадрах меток: [onset_frame, offset_frame)"""
    class_id: int
    onset_frame: int
    offset_frame: int
    directions: np.ndarray
    source_id: int = 0

    def __post_init__(self):
        if self.onset_frame >= self.offset_frame:
            raise ValidationError(
                f"Event onset {self.onset_frame} must precede offset {self.offset_frame}"
            )
        directions = np.asarray(self.directions, dtype=np.float64)
        if directions.ndim == 1:
            directions = np.tile(directions, (self.length, 1))
        if directions.shape != (self.length, 3):
            raise ShapeError(f"Expected directions of shape ({self.length}, 3), got {directions.shape}")
        norms = np.linalg.norm(directions, axis=1)
        if np.any(np.abs(norms - 1.0) > NORM_TOLERANCE):
            raise InvariantError(f"Event directions of class {self.class_id} are not unit vectors")
        self.directions = directions

    @property
    def length(self) -> int:
        return self.offset_frame - self.onset_frame

    def key(self):
        return (self.class_id, self.onset_frame, self.offset_frame)

    def crop(self, start: int, stop: int) -> 'EventInstance':
        """Часть события внутри [start, stop) с кадрами относительно start"""
        onset, offset = max(self.onset_frame, start), min(self.offset_frame, stop)
        if onset >= offset:
            return None
        piece = self.directions[onset - self.onset_frame:offset - self.onset_frame]
        return EventInstance(self.class_id, onset - start, offset - start, piece, self.source_id)


@dataclass
class ClipLabels:
    """
    Трековые метки клипа

    sed: (K, T', n_class) - активность/вероятность класса на треке
    doa: (K, T', 3) - декартово направление, нулевой вектор в неактивных кадрах
    """
    sed: np.ndarray
    doa: np.ndarray

    def __post_init__(self):
        self.sed = np.asarray(self.sed, dtype=np.float64)
        self.doa = np.asarray(self.doa, dtype=np.float64)
        if self.sed.ndim != 3 or self.doa.ndim != 3 or self.doa.shape[2] != 3:
            raise ShapeError(f"Expected sed (K, T', C) and doa (K, T', 3), "
                             f"got {self.sed.shape} and {self.doa.shape}")
        if self.sed.shape[:2] != self.doa.shape[:2]:
            raise ShapeError(f"Track/frame mismatch: sed {self.sed.shape} vs doa {self.doa.shape}")

    @classmethod
    def empty(cls, n_tracks: int = DEFAULT_TRACKS, n_frames: int = 0,
              n_class: int = DEFAULT_CLASSES) -> 'ClipLabels':
        return cls(np.zeros((n_tracks, n_frames, n_class)), np.zeros((n_tracks, n_frames, 3)))

    @property
    def n_tracks(self) -> int:
        return self.sed.shape[0]

    @property
    def n_frames(self) -> int:
        return self.sed.shape[1]

    @property
    def n_class(self) -> int:
        return self.sed.shape[2]

    @property
    def activity(self) -> np.ndarray:
        """Максимальная активность по классам, (K, T')"""
        if self.n_class == 0:
            return np.zeros(self.sed.shape[:2])
        return self.sed.max(axis=2)

    def active_mask(self, threshold: float = ACTIVITY_THRESHOLD) -> np.ndarray:
        return self.activity >= threshold

    def class_ids(self, threshold: float = ACTIVITY_THRESHOLD) -> np.ndarray:
        """Класс на каждом треке и кадре, -1 в неактивных кадрах"""
        ids = np.argmax(self.sed, axis=2) if self.n_class else np.zeros(self.sed.shape[:2], dtype=int)
        return np.where(self.active_mask(threshold), ids, -1)

    def validate(self, clip_frames: int = CLIP_FRAMES) -> None:
        """
        Проверка инвариантов трекового формата

        Неактивные кадры несут нулевое направление, активные - единичное;
        внутри клипа каждый трек несёт не более одного класса.
        """
        if np.any(self.sed < 0.0) or np.any(self.sed > 1.0):
            raise ValidationError("SED activity outside [0, 1]")

        active = self.active_mask()
        norms = np.linalg.norm(self.doa, axis=2)
        if np.any(norms[~active] != 0.0):
            raise InvariantError("Inactive frames must carry the zero-direction sentinel")
        if np.any(np.abs(norms[active] - 1.0) > NORM_TOLERANCE):
            raise InvariantError("Active frames must carry unit directions")

        ids = self.class_ids()
        for start in range(0, self.n_frames, clip_frames):
            chunk = ids[:, start:start + clip_frames]
            for k in range(self.n_tracks):
                classes = set(chunk[k][chunk[k] >= 0].tolist())
                if len(classes) > 1:
                    raise InvariantError(
                        f"Track {k} hosts classes {sorted(classes)} within the clip starting at frame {start}"
                    )


def _order_key(indexed):
    """Порядок (onset, class_id, index), уточнённый offset, source_id и направлениями"""
    index, event = indexed
    return (event.onset_frame, event.class_id, event.offset_frame, event.source_id,
            event.directions.tobytes(), index)


def reorder_events(events: Sequence[EventInstance],
                   n_tracks: int = DEFAULT_TRACKS,
                   n_frames: int = CLIP_FRAMES,
                   n_class: int = DEFAULT_CLASSES) -> ClipLabels:
    """
    Трековое переупорядочивание внутри одного клипа

    События обрабатываются в порядке (onset, class_id, ...) и занимают первый
    ещё не использованный в клипе трек; трек закреплён за событием до конца
    клипа, освободившиеся треки повторно не выдаются.

    Args:
        events: События клипа
        n_tracks (int): Количество треков K
        n_frames (int): Количество кадров меток T'
        n_class (int): Количество классов

    Returns:
        ClipLabels: Метки (K, T')
    """
    labels = ClipLabels.empty(n_tracks, n_frames, n_class)
    ordered = sorted(enumerate(events), key=_order_key)

    for track, (index, event) in enumerate(ordered):
        if not 0 <= event.class_id < n_class:
            raise RangeError(f"Class {event.class_id} outside [0, {n_class})")
        if event.onset_frame < 0 or event.offset_frame > n_frames:
            raise ValidationError(
                f"Event [{event.onset_frame}, {event.offset_frame}) does not fit in {n_frames} frames"
            )
        if track >= n_tracks:
            raise TrackOverflowError(
                f"No free track for event #{index} (class {event.class_id}, frames "
                f"[{event.onset_frame}, {event.offset_frame})): {len(events)} events exceed "
                f"{n_tracks} tracks",
                event=event,
            )
        span = slice(event.onset_frame, event.offset_frame)
        labels.sed[track, span, event.class_id] = 1.0
        labels.doa[track, span] = event.directions

    return labels


def reorder_clipwise(events: Sequence[EventInstance],
                     n_tracks: int = DEFAULT_TRACKS,
                     n_frames: int = CLIP_FRAMES,
                     n_class: int = DEFAULT_CLASSES,
                     clip_frames: int = CLIP_FRAMES) -> ClipLabels:
    """Переупорядочивание по клипам длины clip_frames; события на границе клипов делятся"""
    if clip_frames < 1:
        raise ValidationError(f"Clip length must be positive, got {clip_frames}")

    sed_parts, doa_parts = [], []
    for clip_index, start in enumerate(range(0, n_frames, clip_frames)):
        stop = min(start + clip_frames, n_frames)
        pieces = [piece for piece in (e.crop(start, stop) for e in events) if piece is not None]
        try:
            clip = reorder_events(pieces, n_tracks, stop - start, n_class)
        except TrackOverflowError as e:
            raise TrackOverflowError(f"clip {clip_index} (frame {start}): {e}", event=e.event) from e
        sed_parts.append(clip.sed)
        doa_parts.append(clip.doa)

    if not sed_parts:
        return ClipLabels.empty(n_tracks, 0, n_class)
    return ClipLabels(np.concatenate(sed_parts, axis=1), np.concatenate(doa_parts, axis=1))


def events_to_tracks(events: Sequence[EventInstance],
                     n_tracks: int = DEFAULT_TRACKS,
                     n_frames: int = CLIP_FRAMES,
                     n_class: int = DEFAULT_CLASSES) -> ClipLabels:
    """Раскладка событий по трекам source_id (для уже трековых предсказаний)"""
    labels = ClipLabels.empty(n_tracks, n_frames, n_class)
    for event in events:
        if not 0 <= event.source_id < n_tracks:
            raise TrackOverflowError(f"Event source {event.source_id} is not a track index below {n_tracks}",
                                     event=event)
        if not 0 <= event.class_id < n_class:
            raise RangeError(f"Class {event.class_id} outside [0, {n_class})")
        if event.offset_frame > n_frames:
            raise ValidationError(f"Event ends at frame {event.offset_frame}, clip has {n_frames}")
        span = slice(event.onset_frame, event.offset_frame)
        if np.any(labels.sed[event.source_id, span] > 0):
            raise ValidationError(
                f"Track {event.source_id} already active within [{event.onset_frame}, {event.offset_frame})"
            )
        labels.sed[event.source_id, span, event.class_id] = 1.0
        labels.doa[event.source_id, span] = event.directions
    return labels


def collapse_tracks(labels: ClipLabels) -> np.ndarray:
    """Поклассовая активность (T', n_class): максимум по трекам"""
    if labels.n_tracks == 0:
        return np.zeros((labels.n_frames, labels.n_class))
    return labels.sed.max(axis=0)


def extract_events(labels: ClipLabels, threshold: float = ACTIVITY_THRESHOLD) -> List[EventInstance]:
    """
    Извлечение событий из трековых меток

    Событие - непрерывный участок активности одного класса на треке;
    source_id равен номеру трека.
    """
    ids = labels.class_ids(threshold)
    events = []
    for k in range(labels.n_tracks):
        t = 0
        while t < labels.n_frames:
            class_id = ids[k, t]
            if class_id < 0:
                t += 1
                continue
            end = t
            while end < labels.n_frames and ids[k, end] == class_id:
                end += 1
            directions = normalize(labels.doa[k, t:end])
            events.append(EventInstance(int(class_id), t, end, directions, source_id=k))
            t = end
    events.sort(key=lambda e: (e.onset_frame, e.class_id, e.source_id))
    return events


# Метаданные DCASE: frame,class,source,azimuth,elevation[,distance]

def _parse_int(token: str, what: str, line_number: int) -> int:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"{what} '{token}' is not a number", line_number) from None
    if not math.isfinite(value) or value != int(value):
        raise ParseError(f"{what} '{token}' is not an integer", line_number)
    return int(value)


def _parse_angle(token: str, what: str, line_number: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"{what} '{token}' is not a number", line_number) from None
    if not math.isfinite(value):
        raise ParseError(f"{what} '{token}' is not finite", line_number)
    return value


def parse_metadata_csv(text: str, n_class: int = DEFAULT_CLASSES) -> List[EventInstance]:
    """
    Разбор CSV метаданных DCASE

    Строки группируются в события по (class, source) с непрерывными кадрами.

    Args:
        text (str): Содержимое файла
        n_class (int): Количество классов

    Returns:
        List[EventInstance]: События в порядке (onset, class, source)
    """
    rows = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = [token.strip() for token in line.split(',')]
        if len(tokens) not in (5, 6):
            raise ParseError(f"expected 5 or 6 fields, got {len(tokens)}", line_number)

        frame = _parse_int(tokens[0], 'frame', line_number)
        class_id = _parse_int(tokens[1], 'class', line_number)
        source = _parse_int(tokens[2], 'source', line_number)
        azimuth = _parse_angle(tokens[3], 'azimuth', line_number)
        elevation = _parse_angle(tokens[4], 'elevation', line_number)

        if frame < 0:
            raise ParseError(f"negative frame {frame}", line_number)
        if not 0 <= class_id < n_class:
            raise RangeError(f"line {line_number}: class {class_id} outside [0, {n_class})")
        if azimuth == -180.0:
            azimuth = 180.0
        if not (-180.0 < azimuth <= 180.0) or not (-90.0 <= elevation <= 90.0):
            raise RangeError(f"line {line_number}: direction ({azimuth}, {elevation}) out of range")

        key = (class_id, source, frame)
        if key in rows:
            raise ParseError(f"duplicate row for frame {frame}, class {class_id}, source {source}",
                             line_number)
        rows[key] = (azimuth, elevation)

    events = []
    current = None
    for class_id, source, frame in sorted(rows):
        if current and current[0] == class_id and current[1] == source and current[3] == frame:
            current[3] = frame + 1
            current[4].append(rows[(class_id, source, frame)])
        else:
            if current:
                events.append(current)
            current = [class_id, source, frame, frame + 1, [rows[(class_id, source, frame)]]]
    if current:
        events.append(current)

    instances = []
    for class_id, source, onset, offset, angles in events:
        azel = np.asarray(angles, dtype=np.float64)
        directions = azel_to_unit_array(azel[:, 0], azel[:, 1])
        instances.append(EventInstance(class_id, onset, offset, directions, source_id=source))

    instances.sort(key=lambda e: (e.onset_frame, e.class_id, e.source_id))
    logger.debug(f"Parsed {len(rows)} metadata rows into {len(instances)} events")
    return instances


def _format_angle(value: float) -> str:
    value = round(float(value), 6)
    if abs(value - round(value)) < 1e-6:
        return str(int(round(value)))
    return f"{value:.6f}".rstrip('0').rstrip('.')


def serialize_metadata_csv(events: Sequence[EventInstance]) -> str:
    """Запись событий в CSV DCASE; строки упорядочены по (frame, class, source)"""
    rows = []
    for event in events:
        azimuth, elevation = unit_to_azel_array(event.directions)
        for offset, frame in enumerate(range(event.onset_frame, event.offset_frame)):
            rows.append((frame, event.class_id, event.source_id,
                         _format_angle(azimuth[offset]), _format_angle(elevation[offset])))

    rows.sort(key=lambda row: row[:3])
    if not rows:
        return ''
    return '\n'.join(','.join(str(field) for field in row) for row in rows) + '\n'
