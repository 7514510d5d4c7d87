import json

import numpy as np
import pytest

from seld_toolkit.core.trackwise import parse_metadata_csv
from seld_toolkit.formats.tensor_file import load_tensor
from seld_toolkit.formats.wav import read_wav
from seld_toolkit.services.pipeline import SeldPipeline, run_pipeline
from seld_toolkit.utils.config import PipelineConfig
from seld_toolkit.utils.exceptions import ConfigurationError, FormatError, UndefinedMetricError

from .conftest import static_scene_dict


def _write_scene(tmp_path, events, **extra):
    path = tmp_path / 'scene.json'
    path.write_text(json.dumps(static_scene_dict(events, **extra)))
    return str(path)


@pytest.fixture
def single_source(tmp_path):
    return _write_scene(tmp_path, [(3, 1.0, 3.0, 30, 20, {'type': 'noise', 'amplitude': 0.1})])


def test_closed_loop_single_source(tmp_path, single_source):
    config = PipelineConfig(scene_path=single_source, output_dir=str(tmp_path / 'out'))
    results = run_pipeline(config)
    report = results['report']

    assert list(results['stages']) == ['simulate', 'features', 'beamform']
    assert report.acc == 100.0
    assert report.mae < 0.06
    assert report.mdr == 0.0
    # метка 9 захватывает начало события в 1.0 с: одна вставка на 20 эталонных кадров
    assert report.er20 == pytest.approx(1.0 / 20.0)
    assert report.f20 == pytest.approx(100.0 * 40.0 / 41.0)
    assert report.lr_cd == 100.0

    out = tmp_path / 'out'
    for name in ('foa.wav', 'mic.wav', 'metadata.csv', 'pred_metadata.csv', 'features_doa.seldtnsr',
                 'features_sed.seldtnsr', 'features_beamformed.seldtnsr', 'beamform_report.txt', 'metrics.txt',
                 'metrics.csv'):
        assert (out / name).exists(), name
    assert len(list(out.glob('beamformed_track*.wav'))) == 6

    assert load_tensor(str(out / 'features_doa.seldtnsr')).shape == (7, 249, 64)
    assert load_tensor(str(out / 'features_sed.seldtnsr')).shape == (1, 249, 64)
    assert load_tensor(str(out / 'features_beamformed.seldtnsr')).shape == (6, 249, 64)
    assert (out / 'metrics.csv').read_text().splitlines()[0].startswith('er20,f20,le_cd')
    assert (out / 'beamform_report.txt').read_text().startswith('tracks=1\n')

    events = parse_metadata_csv((out / 'metadata.csv').read_text())
    assert [(e.class_id, e.onset_frame, e.offset_frame) for e in events] == [(3, 10, 30)]


def _artifacts(directory):
    return {path.name: path.read_bytes() for path in sorted(directory.iterdir())}


def test_outputs_are_deterministic(tmp_path, single_source):
    for name in ('a', 'b'):
        run_pipeline(PipelineConfig(scene_path=single_source, output_dir=str(tmp_path / name)))

    first, second = _artifacts(tmp_path / 'a'), _artifacts(tmp_path / 'b')
    assert {'features_doa.seldtnsr', 'features_beamformed.seldtnsr', 'beamformed_track0.wav',
            'pred_metadata.csv', 'metrics.txt', 'metrics.csv'} <= set(first)
    assert first.keys() == second.keys()
    for name in first:
        assert first[name] == second[name], name


def test_stages_match_full_run(tmp_path, single_source):
    run_pipeline(PipelineConfig(scene_path=single_source, output_dir=str(tmp_path / 'full')))

    pipeline = SeldPipeline(PipelineConfig(scene_path=single_source, output_dir=str(tmp_path / 'staged')))
    pipeline.run_simulate()
    pipeline.run_features()
    pipeline.run_beamform()
    pipeline.run_evaluate()

    assert _artifacts(tmp_path / 'staged') == _artifacts(tmp_path / 'full')


def test_seed_override_changes_audio(tmp_path, single_source):
    SeldPipeline(PipelineConfig(scene_path=single_source, output_dir=str(tmp_path / 'a'))).run_simulate()
    SeldPipeline(PipelineConfig(scene_path=single_source, output_dir=str(tmp_path / 'b'),
                                seed=99)).run_simulate()
    a = read_wav(str(tmp_path / 'a' / 'foa.wav')).samples
    b = read_wav(str(tmp_path / 'b' / 'foa.wav')).samples
    assert not np.array_equal(a, b)


def test_three_sources_are_tracked(tmp_path):
    scene = _write_scene(tmp_path, [
        (1, 0.0, 3.0, 0, 0, {'type': 'noise'}),
        (0, 0.5, 1.5, 90, 0, {'type': 'noise'}),
        (5, 1.8, 4.0, -120, 30, {'type': 'noise'}),
    ])
    pipeline = SeldPipeline(PipelineConfig(scene_path=scene, output_dir=str(tmp_path / 'out'), n_tracks=3))
    pipeline.run_simulate()

    events = parse_metadata_csv((tmp_path / 'out' / 'metadata.csv').read_text())
    assert sorted((e.source_id, e.class_id) for e in events) == [(0, 1), (1, 0), (2, 5)]

    result = pipeline.run_reorder()
    assert result['tracks_used'] == 3
    assert (tmp_path / 'out' / 'metadata_trackwise.csv').read_text() == \
        (tmp_path / 'out' / 'metadata.csv').read_text()


def test_reorder_without_audio(tmp_path):
    metadata = tmp_path / 'fold1.csv'
    metadata.write_text("0,2,5,10,0\n1,2,5,10,0\n3,7,1,-90,10\n60,1,0,0,0\n")
    pipeline = SeldPipeline(PipelineConfig(metadata_path=str(metadata), output_dir=str(tmp_path / 'out')))

    result = pipeline.run_reorder()
    assert result['label_frames'] == 100
    assert result['events'] == 3
    text = (tmp_path / 'out' / 'metadata_trackwise.csv').read_text()
    assert text.splitlines() == ['0,2,0,10,0', '1,2,0,10,0', '3,7,1,-90,10', '60,1,0,0,0']


def test_fusion_stage(tmp_path, single_source):
    pipeline = SeldPipeline(PipelineConfig(scene_path=single_source, output_dir=str(tmp_path / 'out'), seed=1))
    pipeline.run_simulate()
    pipeline.run_features()

    result = pipeline.run_fusion()
    assert result['shape'] == (7, 249, 64)
    assert result['max_row_error'] < 1e-9
    assert load_tensor(result['output']).shape == (7, 249, 64)

    doa_only = pipeline.run_fusion(use_sed=False)
    assert doa_only['max_row_error'] < 1e-9

    with pytest.raises(FormatError):
        pipeline.run_fusion(use_beamformed=True)
    pipeline.run_beamform()
    with_bf = pipeline.run_fusion(use_beamformed=True)
    assert with_bf['shape'] == (13, 249, 64)
    assert with_bf['max_row_error'] < 1e-9


def test_empty_scene_has_no_references(tmp_path):
    scene = _write_scene(tmp_path, [])
    with pytest.raises(UndefinedMetricError, match='no references'):
        run_pipeline(PipelineConfig(scene_path=scene, output_dir=str(tmp_path / 'out')))


def test_missing_inputs(tmp_path):
    pipeline = SeldPipeline(PipelineConfig(output_dir=str(tmp_path / 'out')))
    with pytest.raises(ConfigurationError):
        pipeline.run_simulate()
    with pytest.raises(FormatError):
        pipeline.run_features()


def test_scene_rate_must_match(tmp_path):
    scene = _write_scene(tmp_path, [], sample_rate=16000)
    with pytest.raises(ConfigurationError):
        SeldPipeline(PipelineConfig(scene_path=scene, output_dir=str(tmp_path / 'out'))).run_simulate()
