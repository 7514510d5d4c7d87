import json

import numpy as np
import pytest
import yaml

from seld_toolkit.core.dsp import AudioClip, stft
from seld_toolkit.core.geometry import AzEl
from seld_toolkit.core.scene import (
    EventSpec, MicArrayGeometry, SceneConfig, capsule_delays, encode_foa, ground_truth_labels,
    load_scene_config, propagate_spectrum, render_micarray, scene_events, scene_warnings,
)
from seld_toolkit.core.signals import NoiseBurstSignal, ToneSignal
from seld_toolkit.formats.wav import write_wav
from seld_toolkit.utils.exceptions import ConfigurationError, TrackOverflowError, ValidationError

from .conftest import static_scene_dict, unit


def _static(class_id, onset, offset, az, el, signal=None, source_id=0):
    return EventSpec(class_id, onset, offset, [(onset, AzEl(az, el))],
                     signal or NoiseBurstSignal(amplitude=0.1), source_id)


class TestEventSpec:

    def test_validation(self):
        with pytest.raises(ValidationError):
            _static(0, 1.0, 1.0, 0, 0)
        with pytest.raises(ValidationError):
            _static(0, -0.5, 1.0, 0, 0)
        with pytest.raises(ValidationError):
            EventSpec(0, 0.0, 2.0, [(0.0, AzEl(0, 0)), (1.0, AzEl(90, 0))], NoiseBurstSignal())
        with pytest.raises(ValidationError):
            EventSpec(0, 0.0, 1.0, [(0.0, AzEl(0, 0)), (0.0, AzEl(90, 0))], NoiseBurstSignal())

    def test_moving_source_is_interpolated(self):
        event = EventSpec(0, 0.0, 2.0, [(0.0, AzEl(0, 0)), (2.0, AzEl(90, 0))], NoiseBurstSignal())
        directions = event.directions_at(np.array([0.0, 1.0, 2.0, 3.0]))
        assert np.allclose(directions[1], unit(45, 0))
        assert np.allclose(directions[3], unit(90, 0))

    def test_audio_clip_signal_is_wrapped(self):
        event = EventSpec(0, 0.0, 1.0, [(0.0, AzEl(0, 0))], AudioClip(np.ones(10)))
        assert event.signal.render(3, 24000, None).tolist() == [1.0, 1.0, 1.0]


class TestSceneConfig:

    def test_from_dict_requires_duration(self):
        with pytest.raises(ConfigurationError):
            SceneConfig.from_dict({'events': []})

    def test_class_range(self):
        with pytest.raises(ValidationError):
            SceneConfig(5.0, [_static(13, 0.0, 1.0, 0, 0)])

    def test_load_yaml_with_relative_clip(self, tmp_path):
        write_wav(str(tmp_path / 'src.wav'), AudioClip(np.full(100, 0.5), 24000))
        scene = static_scene_dict([(2, 0.0, 1.0, 30, 10, {'type': 'clip', 'path': 'src.wav'})], duration=1.0)
        (tmp_path / 'scene.yaml').write_text(yaml.safe_dump(scene))

        loaded = load_scene_config(str(tmp_path / 'scene.yaml'))
        assert loaded.events[0].class_id == 2
        foa = encode_foa(loaded)
        assert np.allclose(foa.samples[0], 0.5)

    def test_load_json(self, tmp_path):
        path = tmp_path / 'scene.json'
        path.write_text(json.dumps(static_scene_dict([(0, 0.0, 1.0, 0, 0, {'type': 'noise'})])))
        assert load_scene_config(str(path)).duration == 5.0

        with pytest.raises(ConfigurationError):
            load_scene_config(str(tmp_path / 'missing.json'))

    def test_warnings(self):
        scene = SceneConfig(2.0, [_static(0, 1.0, 3.0, 0, 0), _static(1, 2.5, 3.0, 0, 0)])
        messages = scene_warnings(scene)
        assert len(messages) == 2
        assert 'clipped' in messages[0]
        assert 'dropped' in messages[1]


class TestFoa:

    def test_static_source_encoding(self):
        scene = SceneConfig(2.0, [_static(0, 0.5, 1.5, 30, 20)], seed=1)
        foa = encode_foa(scene)
        d = unit(30, 20)

        assert foa.channels == 4
        assert foa.num_samples == 48000
        assert np.allclose(foa.samples[1:], foa.samples[0] * d[:, None])
        assert np.all(foa.samples[:, :12000] == 0.0)
        assert np.all(foa.samples[:, 36000:] == 0.0)
        assert np.any(foa.samples[0, 12000:36000] != 0.0)

    def test_deterministic_for_seed(self):
        events = [_static(0, 0.0, 1.0, 0, 0), _static(1, 0.5, 2.0, 90, 0)]
        a = encode_foa(SceneConfig(2.0, events, seed=5)).samples
        b = encode_foa(SceneConfig(2.0, events, seed=5)).samples
        c = encode_foa(SceneConfig(2.0, events, seed=6)).samples
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_noise_at_requested_snr(self):
        events = [_static(0, 0.0, 2.0, 0, 0)]
        clean = encode_foa(SceneConfig(2.0, events, seed=2)).samples
        noisy = encode_foa(SceneConfig(2.0, events, noise_snr_db=20.0, seed=2)).samples
        noise = noisy - clean
        assert np.mean(noise[0] ** 2) == pytest.approx(np.mean(clean[0] ** 2) / 100.0, rel=1e-9)

    def test_silent_scene_skips_noise(self):
        foa = encode_foa(SceneConfig(1.0, [], noise_snr_db=10.0))
        assert np.all(foa.samples == 0.0)


class TestMicArray:

    def test_tetrahedral_geometry(self):
        geom = MicArrayGeometry.tetrahedral(0.042)
        assert geom.channels == 4
        assert np.allclose(np.linalg.norm(geom.positions, axis=1), 0.042)

    def test_capsule_delay(self):
        geom = MicArrayGeometry.tetrahedral(0.042)
        toward_capsule = geom.positions[0] / 0.042
        delays = capsule_delays(toward_capsule, geom, 343.0)
        assert delays.shape == (1, 4)
        assert -delays[0, 0] * 24000 == pytest.approx(0.042 / 343.0 * 24000, rel=1e-9)
        assert -delays[0, 0] * 24000 == pytest.approx(2.94, abs=0.01)

    def test_spherical_delay(self):
        geom = MicArrayGeometry(np.array([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]]))
        delays = capsule_delays(np.array([1.0, 0.0, 0.0]), geom, 343.0, 'spherical', 1.0)
        assert delays[0, 0] == 0.0
        assert delays[0, 1] == pytest.approx(-0.1 / 343.0)

        with pytest.raises(ConfigurationError):
            capsule_delays(np.array([1.0, 0.0, 0.0]), geom, 343.0, 'conical')

    def test_propagate_spectrum_phase(self, noise_clip):
        geom = MicArrayGeometry.tetrahedral()
        spec = stft(noise_clip)
        d = unit(60, -10)
        out = propagate_spectrum(spec, np.tile(d, (spec.frames, 1)), geom)
        tau = capsule_delays(d, geom)[0]
        expected = np.exp(-2j * np.pi * spec.frequencies[None, :] * tau[:, None])
        ratio = out.coefficients[:, 5, 1:] / spec.coefficients[0, 5, 1:]
        assert np.allclose(ratio, expected[:, 1:])

    def test_tiny_array_reproduces_source(self):
        scene = SceneConfig(2.0, [_static(0, 0.5, 1.5, 30, 20)], seed=4, array_radius=1e-9)
        mic = render_micarray(scene)
        foa = encode_foa(scene)
        assert mic.channels == 4
        assert mic.num_samples == foa.num_samples
        for m in range(4):
            assert np.allclose(mic.samples[m], foa.samples[0], atol=1e-6)

    def test_unknown_wavefront(self):
        with pytest.raises(ConfigurationError):
            render_micarray(SceneConfig(1.0, []), wavefront='conical')


class TestGroundTruth:

    def test_three_sources_on_three_tracks(self):
        scene = SceneConfig(5.0, [
            _static(1, 0.0, 3.0, 0, 0),
            _static(0, 0.5, 1.5, 90, 0),
            _static(5, 1.8, 4.0, -90, 30),
        ])
        labels = ground_truth_labels(scene, n_tracks=3)
        ids = labels.class_ids()

        assert labels.sed.shape == (3, 50, 13)
        assert set(ids[0][ids[0] >= 0]) == {1}
        assert set(ids[1][ids[1] >= 0]) == {0}
        assert set(ids[2][ids[2] >= 0]) == {5}
        assert np.flatnonzero(ids[1] >= 0).tolist() == list(range(5, 15))
        assert np.flatnonzero(ids[2] >= 0).tolist() == list(range(18, 40))
        assert np.allclose(labels.doa[2, 20], unit(-90, 30))
        labels.validate()

    def test_frame_center_rule(self):
        scene = SceneConfig(1.0, [_static(0, 0.03, 0.26, 0, 0), _static(1, 0.5, 0.54, 0, 0)])
        events = scene_events(scene)
        assert len(events) == 1
        assert (events[0].onset_frame, events[0].offset_frame) == (0, 3)

    def test_overflow_reports_frame(self):
        scene = SceneConfig(2.0, [_static(c, 0.0, 1.0, 0, 0) for c in range(4)])
        with pytest.raises(TrackOverflowError) as info:
            ground_truth_labels(scene, n_tracks=3)
        assert info.value.frame == 0

    def test_moving_source_labels_follow_trajectory(self):
        event = EventSpec(0, 0.0, 2.0, [(0.0, AzEl(0, 0)), (2.0, AzEl(90, 0))], ToneSignal())
        labels = ground_truth_labels(SceneConfig(2.0, [event]))
        assert np.allclose(labels.doa[0, 9], unit(42.75, 0), atol=1e-9)
