"""
Общие фикстуры тестов
"""
import numpy as np
import pytest

from seld_toolkit.core.dsp import AudioClip
from seld_toolkit.core.geometry import AzEl, azel_to_unit

SAMPLE_RATE = 24000


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def noise_clip(rng):
    """Моно белый шум 1 с"""
    return AudioClip(0.1 * rng.standard_normal(SAMPLE_RATE), SAMPLE_RATE)


@pytest.fixture
def tone_clip():
    """Моно тон 1 кГц длительностью 5 с"""
    t = np.arange(5 * SAMPLE_RATE) / SAMPLE_RATE
    return AudioClip(0.5 * np.sin(2 * np.pi * 1000.0 * t), SAMPLE_RATE)


def unit(azimuth, elevation):
    return azel_to_unit(AzEl(azimuth, elevation)).as_array()


def static_scene_dict(events, duration=5.0, **extra):
    """Словарь сцены со статичными событиями: (class, onset, offset, az, el, signal)"""
    scene = {
        'duration': duration,
        'seed': 7,
        'events': [
            {
                'class_id': class_id,
                'onset': onset,
                'offset': offset,
                'direction': {'azimuth': az, 'elevation': el},
                'signal': signal,
            }
            for class_id, onset, offset, az, el, signal in events
        ],
    }
    scene.update(extra)
    return scene
