"""
Венгерский алгоритм и перестановочно-инвариантные функции потерь
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .trackwise import ClipLabels
from ..utils.exceptions import ShapeError, ValidationError

logger = logging.getLogger(__name__)

# Фиктивные столбцы при rows > cols; любое полное назначение использует их
# одинаковое число раз, поэтому значение не влияет на оптимум
PAD_COST = 0.0
BCE_EPSILON = 1e-7
TIE_TOLERANCE = 1e-9


def _optimal_cost(cost: np.ndarray) -> float:
    if cost.shape[0] == 0:
        return 0.0
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


def hungarian(cost) -> Tuple[np.ndarray, float]:
    """
    Назначение строк столбцам с минимальной суммарной стоимостью

    Среди оптимальных назначений выбирается лексикографически наименьшее
    (строки по порядку получают наименьший допустимый столбец).

    Args:
        cost: Матрица стоимостей (rows, cols)

    Returns:
        Tuple[np.ndarray, float]: Столбец для каждой строки (-1 - без пары) и суммарная стоимость
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2:
        raise ShapeError(f"Cost matrix must be 2-D, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValidationError("Cost matrix has non-finite entries")

    rows, cols = c.shape
    if rows == 0 or cols == 0:
        return np.full(rows, -1, dtype=int), 0.0

    padded = c
    if rows > cols:
        padded = np.hstack([c, np.full((rows, rows - cols), PAD_COST)])

    best = _optimal_cost(padded)
    tolerance = TIE_TOLERANCE * max(1.0, abs(best))

    assignment = np.full(rows, -1, dtype=int)
    free = list(range(padded.shape[1]))
    fixed = 0.0
    for r in range(rows):
        for j in free:
            rest = [x for x in free if x != j]
            remaining = _optimal_cost(padded[np.ix_(np.arange(r + 1, rows), np.array(rest, dtype=int))])
            if fixed + padded[r, j] + remaining <= best + tolerance:
                assignment[r] = j
                fixed += padded[r, j]
                free.remove(j)
                break

    assignment = np.where(assignment < cols, assignment, -1)
    matched = np.flatnonzero(assignment >= 0)
    return assignment, float(c[matched, assignment[matched]].sum())


def _check_pair(pred: ClipLabels, ref: ClipLabels):
    if pred.sed.shape != ref.sed.shape:
        raise ShapeError(f"Prediction {pred.sed.shape} and reference {ref.sed.shape} differ")


def doa_cost_matrix(pred: ClipLabels, ref: ClipLabels) -> np.ndarray:
    """
    C[r, p] - средний квадрат евклидова расстояния по активным кадрам эталона r

    Неактивный на всём клипе эталонный трек даёт нулевую строку.
    """
    _check_pair(pred, ref)
    active = ref.active_mask()
    cost = np.zeros((ref.n_tracks, pred.n_tracks))
    for r in range(ref.n_tracks):
        frames = active[r]
        if not frames.any():
            continue
        diff = pred.doa[:, frames, :] - ref.doa[r, frames, :][np.newaxis]
        cost[r] = np.mean(np.sum(diff ** 2, axis=2), axis=1)
    return cost


def sed_cost_matrix(pred: ClipLabels, ref: ClipLabels, epsilon: float = BCE_EPSILON) -> np.ndarray:
    """C[r, p] - средняя бинарная кросс-энтропия по кадрам и классам"""
    _check_pair(pred, ref)
    if np.any(pred.sed < 0.0) or np.any(pred.sed > 1.0):
        raise ValidationError("Predicted probabilities must lie in [0, 1]")
    p = np.clip(pred.sed, epsilon, 1.0 - epsilon)[np.newaxis]
    y = ref.sed[:, np.newaxis]
    bce = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return bce.mean(axis=(2, 3))


def _pit(cost: np.ndarray) -> Tuple[float, np.ndarray]:
    if cost.shape[0] == 0:
        return 0.0, np.zeros(0, dtype=int)
    permutation, total = hungarian(cost)
    return total / cost.shape[0], permutation


def pit_doa_loss(pred: ClipLabels, ref: ClipLabels) -> Tuple[float, np.ndarray]:
    """
    PIT-потеря DoA (MSE)

    Returns:
        Tuple[float, np.ndarray]: Потеря и перестановка (эталонный трек -> трек предсказания)
    """
    return _pit(doa_cost_matrix(pred, ref))


def pit_sed_loss(pred: ClipLabels, ref: ClipLabels, epsilon: float = BCE_EPSILON) -> Tuple[float, np.ndarray]:
    """PIT-потеря SED (BCE); вероятности ограничиваются [epsilon, 1 - epsilon]"""
    return _pit(sed_cost_matrix(pred, ref, epsilon))


@dataclass
class PitResult:
    doa_loss: float
    doa_permutation: np.ndarray
    sed_loss: float
    sed_permutation: np.ndarray


def pit_losses(pred: ClipLabels, ref: ClipLabels, joint: bool = False) -> PitResult:
    """
    Обе PIT-потери

    По умолчанию перестановки выбираются независимо; при joint=True -
    одна перестановка по сумме матриц стоимостей.
    """
    doa_cost = doa_cost_matrix(pred, ref)
    sed_cost = sed_cost_matrix(pred, ref)
    if not joint:
        doa_loss, doa_perm = _pit(doa_cost)
        sed_loss, sed_perm = _pit(sed_cost)
        return PitResult(doa_loss, doa_perm, sed_loss, sed_perm)

    permutation, _ = hungarian(doa_cost + sed_cost)
    rows = np.arange(ref.n_tracks)
    k = ref.n_tracks
    return PitResult(float(doa_cost[rows, permutation].sum() / k), permutation,
                     float(sed_cost[rows, permutation].sum() / k), permutation)
