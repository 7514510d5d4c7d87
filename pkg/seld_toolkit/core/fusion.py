"""
Прямой проход слияния признаков в игрушечном масштабе: кросс-внимание
(признаки CNN -> трековые DoA/SED-токены) и поэлементный гейт
"""
import logging
import os
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.special import softmax

from ..formats.tensor_file import load_tensor, save_tensor
from ..utils.exceptions import ConfigurationError, ShapeError

logger = logging.getLogger(__name__)

GUIDE_DIM = 64
WEIGHT_NAMES = ('query', 'key', 'value', 'output', 'gate')


@dataclass
class FusionWeights:
    """
    Проекции одного блока слияния

    query (C, C), key (D, C), value (D, C), output (C, C), gate (C, C)
    """
    query: np.ndarray
    key: np.ndarray
    value: np.ndarray
    output: np.ndarray
    gate: np.ndarray

    def __post_init__(self):
        for name in WEIGHT_NAMES:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        c = self.query.shape[0]
        d = self.key.shape[0]
        expected = {'query': (c, c), 'key': (d, c), 'value': (d, c), 'output': (c, c), 'gate': (c, c)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"Projection '{name}' has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def channels(self) -> int:
        return self.query.shape[0]

    @property
    def guide_dim(self) -> int:
        return self.key.shape[0]

    @classmethod
    def seeded(cls, channels: int, guide_dim: int = GUIDE_DIM, seed: int = 0) -> 'FusionWeights':
        """Случайные веса N(0, 1/fan_in)"""
        if channels < 1 or guide_dim < 1:
            raise ConfigurationError(f"Invalid fusion dimensions C={channels}, D={guide_dim}")
        rng = np.random.default_rng(seed)

        def draw(rows, cols):
            return rng.standard_normal((rows, cols)) / np.sqrt(rows)

        return cls(query=draw(channels, channels),
                   key=draw(guide_dim, channels),
                   value=draw(guide_dim, channels),
                   output=draw(channels, channels),
                   gate=draw(channels, channels))

    def save(self, directory: str, prefix: str = 'fusion'):
        os.makedirs(directory, exist_ok=True)
        for name in WEIGHT_NAMES:
            save_tensor(os.path.join(directory, f"{prefix}_{name}.seldtnsr"), getattr(self, name))

    @classmethod
    def load(cls, directory: str, prefix: str = 'fusion') -> 'FusionWeights':
        return cls(**{name: load_tensor(os.path.join(directory, f"{prefix}_{name}.seldtnsr"))
                      for name in WEIGHT_NAMES})


@dataclass
class FusionConfig:
    cnn_channels: int
    guide_dim: int = GUIDE_DIM
    n_tracks: int = 6
    n_class: int = 13
    seed: int = 0

    def weights(self) -> FusionWeights:
        return FusionWeights.seeded(self.cnn_channels, self.guide_dim, self.seed)

    def embedding(self) -> np.ndarray:
        """Проекция трекового (x, y, z, SED) в токен размерности D"""
        rng = np.random.default_rng(np.random.SeedSequence(self.seed).spawn(1)[0])
        rows = 3 + self.n_class
        return rng.standard_normal((rows, self.guide_dim)) / np.sqrt(rows)


def _check_2d(name: str, array: np.ndarray, columns: int) -> np.ndarray:
    array = np.asarray(array, dtype=np.float64)
    if array.ndim != 2 or array.shape[1] != columns:
        raise ShapeError(f"{name} must have shape (n, {columns}), got {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ShapeError(f"{name} has non-finite values")
    return array


def attention_weights(cnn_feat: np.ndarray, guide_feat: np.ndarray, weights: FusionWeights) -> np.ndarray:
    """A = softmax(Q K^T / sqrt(C)) по строкам, (N, L)"""
    cnn_feat = _check_2d('cnn_feat', cnn_feat, weights.channels)
    guide_feat = _check_2d('guide_feat', guide_feat, weights.guide_dim)
    if guide_feat.shape[0] < 1:
        raise ShapeError("Attention needs at least one guide token")
    q = cnn_feat @ weights.query
    k = guide_feat @ weights.key
    return softmax(q @ k.T / np.sqrt(weights.channels), axis=1)


def spatial_attention(cnn_feat: np.ndarray, guide_feat: np.ndarray, weights: FusionWeights) -> np.ndarray:
    """
    Кросс-внимание позиций CNN к трековым токенам

    Args:
        cnn_feat (np.ndarray): Признаки CNN (N позиций, C)
        guide_feat (np.ndarray): Токены (L, D)
        weights (FusionWeights): Проекции

    Returns:
        np.ndarray: (A V) Wo, форма (N, C)
    """
    attention = attention_weights(cnn_feat, guide_feat, weights)
    v = np.asarray(guide_feat, dtype=np.float64) @ weights.value
    return (attention @ v) @ weights.output


def gated_fusion(cnn_feat: np.ndarray, attended: np.ndarray, weights: FusionWeights) -> np.ndarray:
    """fused = cnn + tanh(attended Wg) * attended"""
    cnn_feat = _check_2d('cnn_feat', cnn_feat, weights.channels)
    attended = _check_2d('attended', attended, weights.channels)
    if cnn_feat.shape != attended.shape:
        raise ShapeError(f"cnn_feat {cnn_feat.shape} and attended {attended.shape} differ")
    gate = np.tanh(attended @ weights.gate)
    return cnn_feat + gate * attended


def build_guide_tokens(doa: np.ndarray, sed: np.ndarray, embedding: np.ndarray,
                       use_sed: bool = True) -> np.ndarray:
    """
    Трековые токены: [x, y, z, SED] @ embedding

    use_sed=False обнуляет SED-часть (слияние только с DoA).

    Returns:
        np.ndarray: (K, D)
    """
    doa = np.asarray(doa, dtype=np.float64)
    sed = np.asarray(sed, dtype=np.float64)
    if doa.ndim != 2 or doa.shape[1] != 3 or sed.ndim != 2 or sed.shape[0] != doa.shape[0]:
        raise ShapeError(f"Expected doa (K, 3) and sed (K, n_class), got {doa.shape} and {sed.shape}")
    if embedding.shape[0] != 3 + sed.shape[1]:
        raise ShapeError(f"Embedding has {embedding.shape[0]} rows, expected {3 + sed.shape[1]}")
    if not use_sed:
        sed = np.zeros_like(sed)
    return np.concatenate([doa, sed], axis=1) @ embedding


def progressive_fusion(stages: Sequence[np.ndarray], guide_feat: np.ndarray,
                       weights_per_stage: Sequence[FusionWeights]) -> List[np.ndarray]:
    """Внимание и гейт на каждой стадии CNN; формы стадий сохраняются"""
    if len(stages) != len(weights_per_stage):
        raise ShapeError(f"{len(stages)} stages but {len(weights_per_stage)} weight sets")
    fused = []
    for index, (features, weights) in enumerate(zip(stages, weights_per_stage)):
        attended = spatial_attention(features, guide_feat, weights)
        fused.append(gated_fusion(features, attended, weights))
        logger.debug(f"Fused stage {index}: {np.shape(features)}")
    return fused
