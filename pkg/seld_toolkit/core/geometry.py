"""
Координатные соглашения и угловая арифметика

Азимут отсчитывается против часовой стрелки от +x в горизонтальной плоскости,
угол места - от горизонтальной плоскости к +z (соглашение метаданных DCASE).
"""
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..utils.exceptions import InvariantError, RangeError, UndefinedDistanceError, ValidationError

NORM_TOLERANCE = 1e-6
POLE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class AzEl:
    """Направление в градусах: азимут (-180, 180], угол места [-90, 90]"""
    azimuth: float
    elevation: float

    def __post_init__(self):
        if not (-180.0 < self.azimuth <= 180.0):
            raise RangeError(f"Azimuth {self.azimuth} outside (-180, 180]")
        if not (-90.0 <= self.elevation <= 90.0):
            raise RangeError(f"Elevation {self.elevation} outside [-90, 90]")


@dataclass(frozen=True)
class DirectionVector:
    """Декартово направление на единичной сфере; нулевой вектор - признак неактивности"""
    x: float
    y: float
    z: float

    @classmethod
    def inactive(cls) -> 'DirectionVector':
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, values) -> 'DirectionVector':
        x, y, z = (float(v) for v in np.asarray(values, dtype=np.float64).reshape(3))
        return cls(x, y, z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    @property
    def is_inactive(self) -> bool:
        return self.x == 0.0 and self.y == 0.0 and self.z == 0.0

    def is_normalized(self, tolerance: float = 1e-9) -> bool:
        return abs(self.norm - 1.0) <= tolerance


VectorLike = Union[DirectionVector, np.ndarray, list, tuple]


def _as_array(d: VectorLike) -> np.ndarray:
    if isinstance(d, DirectionVector):
        return d.as_array()
    return np.asarray(d, dtype=np.float64)


def azel_to_unit(a: AzEl) -> DirectionVector:
    """
    Перевод азимута/угла места в единичный вектор

    Args:
        a (AzEl): Направление в градусах

    Returns:
        DirectionVector: (cos el * cos az, cos el * sin az, sin el)
    """
    return DirectionVector.from_array(azel_to_unit_array(a.azimuth, a.elevation))


def unit_to_azel(d: VectorLike) -> AzEl:
    """
    Обратное преобразование единичного вектора в азимут/угол места

    На полюсах азимут равен 0.
    """
    v = _as_array(d)
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise InvariantError(f"Direction is not unit norm (|d| = {norm:.9f})")
    az, el = unit_to_azel_array(v[np.newaxis, :])
    return AzEl(float(az[0]), float(el[0]))


def angular_distance(a: VectorLike, b: VectorLike) -> float:
    """
    Угловое расстояние между направлениями в градусах

    Args:
        a: Первое направление
        b: Второе направление

    Returns:
        float: arccos(clamp(a.b, -1, 1)) в градусах, [0, 180]
    """
    va, vb = _as_array(a), _as_array(b)
    if not np.any(va) or not np.any(vb):
        raise UndefinedDistanceError("Angular distance to the inactive sentinel is undefined")
    return float(np.degrees(np.arccos(np.clip(np.dot(va, vb), -1.0, 1.0))))


# Векторные версии

def azel_to_unit_array(azimuth_deg, elevation_deg) -> np.ndarray:
    """Векторный azel_to_unit; возвращает массив формы (..., 3)"""
    az = np.asarray(azimuth_deg, dtype=np.float64)
    el = np.asarray(elevation_deg, dtype=np.float64)
    if np.any(az <= -180.0) or np.any(az > 180.0):
        raise RangeError("Azimuth outside (-180, 180]")
    if np.any(np.abs(el) > 90.0):
        raise RangeError("Elevation outside [-90, 90]")
    az_rad, el_rad = np.radians(az), np.radians(el)
    return np.stack([np.cos(el_rad) * np.cos(az_rad),
                     np.cos(el_rad) * np.sin(az_rad),
                     np.sin(el_rad)], axis=-1)


def unit_to_azel_array(vectors: np.ndarray):
    """Векторный unit_to_azel для массива (N, 3); возвращает (azimuth, elevation)"""
    v = np.asarray(vectors, dtype=np.float64)
    horizontal = np.hypot(v[..., 0], v[..., 1])
    el = np.degrees(np.arctan2(v[..., 2], horizontal))
    az = np.degrees(np.arctan2(v[..., 1], v[..., 0]))
    az = np.where(az <= -180.0, 180.0, az)
    az = np.where(horizontal < POLE_TOLERANCE, 0.0, az)
    return az, el


def normalize(vectors: np.ndarray, guard: float = 1e-12) -> np.ndarray:
    """Нормировка векторов (..., 3); нулевые векторы остаются нулевыми"""
    v = np.asarray(vectors, dtype=np.float64)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.where(norm > guard, v / np.maximum(norm, guard), 0.0)


def angular_distance_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Матрица угловых расстояний (N, P) в градусах между нормированными наборами"""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    return np.degrees(np.arccos(np.clip(a @ b.T, -1.0, 1.0)))


def slerp(a: np.ndarray, b: np.ndarray, fraction) -> np.ndarray:
    """
    Сферическая линейная интерполяция между единичными векторами

    Args:
        a (np.ndarray): Начальные направления (..., 3)
        b (np.ndarray): Конечные направления (..., 3)
        fraction: Доля пути в [0, 1], транслируется на (...)

    Returns:
        np.ndarray: Интерполированные направления (..., 3)
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    f = np.asarray(fraction, dtype=np.float64)[..., np.newaxis]

    dot = np.clip(np.sum(a * b, axis=-1, keepdims=True), -1.0, 1.0)
    if np.any(dot <= -1.0 + 1e-12):
        raise ValidationError("Slerp between antipodal directions is undefined")

    omega = np.arccos(dot)
    sin_omega = np.sin(omega)
    # Почти совпадающие точки: линейная формула, при a == b результат ровно a
    small = omega < 1e-9
    safe_sin = np.where(small, 1.0, sin_omega)
    spherical = (np.sin((1.0 - f) * omega) * a + np.sin(f * omega) * b) / safe_sin
    linear = a + f * (b - a)
    return np.where(small, linear, spherical)


def rotate_about_z(vectors: np.ndarray, angle_deg: float) -> np.ndarray:
    """Поворот векторов (..., 3) вокруг оси z на angle_deg (против часовой)"""
    phi = np.radians(angle_deg)
    rotation = np.array([[np.cos(phi), -np.sin(phi), 0.0],
                         [np.sin(phi), np.cos(phi), 0.0],
                         [0.0, 0.0, 1.0]])
    return np.asarray(vectors, dtype=np.float64) @ rotation.T
