"""
Сервис пайплайна: стадии читают и пишут артефакты в выходной каталог,
run() выполняет их последовательно
"""
import dataclasses
import logging
import math
import os
from typing import Any, Dict, Optional

import numpy as np

from ..core.beamform import ds_beamform, format_gain_report, snr_gain_report
from ..core.doa import assign_oracle_classes, estimate_doa_iv
from ..core.dsp import (
    AudioClip, FeatureTensor, assemble_features, beamformed_features, concat_features, intensity_vectors, istft,
    logmel, sed_features, stft,
)
from ..core.fusion import FusionConfig, attention_weights, build_guide_tokens, progressive_fusion
from ..core.metrics import MetricsReport, full_report
from ..core.scene import (
    MicArrayGeometry, SceneConfig, diffuse_noise, encode_foa, ground_truth_labels,
    load_scene_config, render_micarray,
)
from ..core.trackwise import (
    ClipLabels, events_to_tracks, extract_events, parse_metadata_csv, reorder_clipwise,
    serialize_metadata_csv,
)
from ..formats.tensor_file import load_tensor, save_tensor
from ..formats.wav import read_wav, wav_info, write_wav
from ..utils.config import PipelineConfig
from ..utils.exceptions import ConfigurationError, FormatError

logger = logging.getLogger(__name__)

FOA_WAV = 'foa.wav'
MIC_WAV = 'mic.wav'
METADATA_CSV = 'metadata.csv'
TRACKWISE_CSV = 'metadata_trackwise.csv'
PRED_CSV = 'pred_metadata.csv'
FEATURES_DOA = 'features_doa.seldtnsr'
FEATURES_SED = 'features_sed.seldtnsr'
FEATURES_BEAMFORMED = 'features_beamformed.seldtnsr'
FEATURES_FUSED = 'features_fused.seldtnsr'
BEAMFORM_REPORT = 'beamform_report.txt'
METRICS_TXT = 'metrics.txt'
METRICS_CSV = 'metrics.csv'


def _read_text(path: str) -> str:
    if not os.path.exists(path):
        raise FormatError(f"File not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return f.read()


def _write_text(path: str, text: str):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)


class SeldPipeline:
    """Стадии SELD-пайплайна над артефактами в cfg.output_dir"""

    def __init__(self, config: PipelineConfig):
        """
        Args:
            config (PipelineConfig): Конфигурация пайплайна
        """
        self.config = config
        os.makedirs(config.output_dir, exist_ok=True)

    # Пути артефактов

    def path(self, name: str) -> str:
        return os.path.join(self.config.output_dir, name)

    @property
    def foa_path(self) -> str:
        return self.config.foa_path or self.path(FOA_WAV)

    @property
    def mic_path(self) -> str:
        return self.config.mic_path or self.path(MIC_WAV)

    @property
    def metadata_path(self) -> str:
        return self.config.metadata_path or self.path(METADATA_CSV)

    @property
    def pred_path(self) -> str:
        return self.config.pred_metadata_path or self.path(PRED_CSV)

    @property
    def frames_per_label(self) -> int:
        return int(round(self.config.label_hop_s / self.config.hop_s))

    @property
    def segment_frames(self) -> int:
        return max(1, int(round(self.config.segment_s / self.config.label_hop_s)))

    def load_scene(self) -> Optional[SceneConfig]:
        if not self.config.scene_path:
            return None
        scene = load_scene_config(self.config.scene_path)
        if self.config.seed is not None:
            scene = dataclasses.replace(scene, seed=self.config.seed)
        if scene.sample_rate != self.config.sample_rate:
            raise ConfigurationError(
                f"Scene sample rate {scene.sample_rate} differs from pipeline rate {self.config.sample_rate}"
            )
        return scene

    def geometry(self, scene: Optional[SceneConfig] = None) -> MicArrayGeometry:
        radius = scene.array_radius if scene else self.config.array_radius
        return MicArrayGeometry.tetrahedral(radius)

    def label_frames(self, audio_path: str) -> int:
        _, samples, sample_rate = wav_info(audio_path)
        return math.ceil(samples / (self.config.label_hop_s * sample_rate) - 1e-9)

    def reference_labels(self, n_frames: int) -> ClipLabels:
        events = parse_metadata_csv(_read_text(self.metadata_path), self.config.n_class)
        return reorder_clipwise(events, self.config.n_tracks, n_frames, self.config.n_class,
                                self.config.label_frames_per_clip)

    def predicted_labels(self, n_frames: int) -> ClipLabels:
        events = parse_metadata_csv(_read_text(self.pred_path), self.config.n_class)
        return events_to_tracks(events, self.config.n_tracks, n_frames, self.config.n_class)

    # Стадии

    def run_simulate(self) -> Dict[str, Any]:
        """Сцена -> foa.wav, mic.wav, metadata.csv"""
        scene = self.load_scene()
        if scene is None:
            raise ConfigurationError("simulate needs a scene config (--scene)")
        cfg = self.config

        foa = encode_foa(scene)
        mic = render_micarray(scene, self.geometry(scene), cfg.speed_of_sound, cfg.window_s, cfg.hop_s,
                              cfg.wavefront, cfg.source_distance)
        labels = ground_truth_labels(scene, cfg.label_hop_s, cfg.n_tracks, cfg.label_frames_per_clip)

        write_wav(self.path(FOA_WAV), foa)
        write_wav(self.path(MIC_WAV), mic)
        _write_text(self.path(METADATA_CSV), serialize_metadata_csv(extract_events(labels)))

        logger.info(f"Simulated {len(scene.events)} events into {cfg.output_dir}")
        return {'events': len(scene.events), 'label_frames': labels.n_frames,
                'foa': self.path(FOA_WAV), 'mic': self.path(MIC_WAV), 'metadata': self.path(METADATA_CSV)}

    def run_features(self) -> Dict[str, Any]:
        """FoA/MIC -> признаки DoA и SED, предсказание оракула -> pred_metadata.csv"""
        cfg = self.config
        foa = read_wav(self.foa_path, cfg.sample_rate)
        spec = stft(foa, cfg.window_s, cfg.hop_s)
        logmels = logmel(spec, cfg.n_mels, cfg.log_floor)
        ivs = intensity_vectors(spec, cfg.n_mels)
        features = assemble_features(logmels, ivs)
        save_tensor(self.path(FEATURES_DOA), features.values)

        sed_shape = None
        if os.path.exists(self.mic_path):
            mic = read_wav(self.mic_path, cfg.sample_rate)
            sed = sed_features(mic, cfg.n_mels, cfg.window_s, cfg.hop_s, cfg.log_floor)
            save_tensor(self.path(FEATURES_SED), sed.values)
            sed_shape = sed.values.shape
        else:
            logger.warning(f"No MIC recording at {self.mic_path}; SED features skipped")

        n_frames = self.label_frames(self.foa_path)
        oracle = estimate_doa_iv(ivs, logmels, cfg.activity_threshold_db, self.frames_per_label,
                                 n_labels=n_frames, n_class=cfg.n_class)
        if os.path.exists(self.metadata_path):
            prediction = assign_oracle_classes(oracle, self.reference_labels(n_frames))
        else:
            logger.warning("No reference metadata; oracle frames keep class 0 on track 0")
            prediction = oracle
        _write_text(self.path(PRED_CSV), serialize_metadata_csv(extract_events(prediction)))

        return {'features_doa': features.values.shape, 'features_sed': sed_shape,
                'active_frames': int(prediction.active_mask().any(axis=0).sum()),
                'label_frames': n_frames}

    def run_beamform(self) -> Dict[str, Any]:
        """MIC + предсказанные траектории -> beamformed_track{k}.wav, отчёт о выигрыше ОСШ"""
        cfg = self.config
        scene = self.load_scene()
        geom = self.geometry(scene)

        mic = read_wav(self.mic_path, cfg.sample_rate)
        spec = stft(mic, cfg.window_s, cfg.hop_s)
        labels = self.predicted_labels(self.label_frames(self.mic_path))

        tracks = ds_beamform(spec, labels, geom, cfg.speed_of_sound, cfg.label_hop_s, cfg.wavefront)
        audio = istft(tracks)
        paths = []
        for k in range(tracks.channels):
            path = self.path(f"beamformed_track{k}.wav")
            write_wav(path, audio.channel(k))
            paths.append(path)
        save_tensor(self.path(FEATURES_BEAMFORMED), beamformed_features(tracks, cfg.n_mels, cfg.log_floor).values)

        report = None
        if scene is not None:
            report = self._gain_report(scene, mic, labels, geom)
            _write_text(self.path(BEAMFORM_REPORT), format_gain_report(report))
        else:
            logger.warning("No scene config; beamform SNR gain report skipped")

        return {'tracks': paths, 'gain_report': report, 'features_beamformed': self.path(FEATURES_BEAMFORMED)}

    def _gain_report(self, scene: SceneConfig, mic: AudioClip, labels: ClipLabels, geom: MicArrayGeometry):
        cfg = self.config
        clean = render_micarray(dataclasses.replace(scene, noise_snr_db=None), geom, cfg.speed_of_sound,
                                cfg.window_s, cfg.hop_s, cfg.wavefront, cfg.source_distance)
        if scene.noise_snr_db is not None:
            noise = mic.samples - clean.samples
        else:
            # Эталонный некоррелированный шум той же мощности, что и сигнал
            power = float(np.mean(clean.samples ** 2)) if clean.samples.size else 0.0
            rng = np.random.default_rng(scene.seed)
            noise = diffuse_noise(clean.channels, clean.num_samples, power, rng)

        signal_spec = stft(clean, cfg.window_s, cfg.hop_s)
        noise_spec = stft(AudioClip(noise, clean.sample_rate), cfg.window_s, cfg.hop_s)
        return snr_gain_report(signal_spec, noise_spec, labels, geom, cfg.speed_of_sound, cfg.label_hop_s,
                               cfg.wavefront)

    def run_reorder(self) -> Dict[str, Any]:
        """Метаданные DCASE -> трековые метки (source = номер трека)"""
        cfg = self.config
        events = parse_metadata_csv(_read_text(self.metadata_path), cfg.n_class)
        if os.path.exists(self.foa_path):
            n_frames = self.label_frames(self.foa_path)
        else:
            last = max((e.offset_frame for e in events), default=0)
            clip = cfg.label_frames_per_clip
            n_frames = -(-last // clip) * clip

        labels = reorder_clipwise(events, cfg.n_tracks, n_frames, cfg.n_class, cfg.label_frames_per_clip)
        labels.validate(cfg.label_frames_per_clip)
        trackwise = extract_events(labels)
        _write_text(self.path(TRACKWISE_CSV), serialize_metadata_csv(trackwise))

        used = int(labels.active_mask().any(axis=1).sum())
        logger.info(f"Reordered {len(events)} events onto {used} tracks")
        return {'events': len(events), 'tracks_used': used, 'label_frames': n_frames,
                'output': self.path(TRACKWISE_CSV)}

    def run_evaluate(self) -> MetricsReport:
        """pred_metadata.csv против metadata.csv -> metrics.txt, metrics.csv"""
        cfg = self.config
        audio = self.foa_path if os.path.exists(self.foa_path) else self.mic_path
        n_frames = self.label_frames(audio)
        reference = self.reference_labels(n_frames)
        prediction = self.predicted_labels(n_frames)

        report = full_report(prediction, reference, cfg.doa_threshold_deg, self.segment_frames)
        _write_text(self.path(METRICS_TXT), report.to_key_value())
        _write_text(self.path(METRICS_CSV), f"{MetricsReport.csv_header()}\n{report.to_csv_row()}\n")
        return report

    def run_fusion(self, use_sed: bool = True, use_beamformed: bool = False) -> Dict[str, Any]:
        """
        Прямой проход слияния над сохранёнными признаками

        Позиции - мел-полосы кадра, каналы - каналы признаков DoA; токены -
        предсказанные треки соответствующего кадра меток.

        Args:
            use_sed (bool): Токены с SED-частью (иначе только DoA)
            use_beamformed (bool): Добавить к признакам log-mel выходов бимформера
        """
        cfg = self.config
        features = load_tensor(self.path(FEATURES_DOA)).astype(np.float64)
        if use_beamformed:
            beamformed = load_tensor(self.path(FEATURES_BEAMFORMED)).astype(np.float64)
            features = concat_features(FeatureTensor(features, 'combined'),
                                       FeatureTensor(beamformed, 'beamformed')).values
        channels, n_frames, _ = features.shape
        labels = self.predicted_labels(self.label_frames(self.foa_path))

        fusion = FusionConfig(cnn_channels=channels, n_tracks=cfg.n_tracks, n_class=cfg.n_class,
                              seed=cfg.seed or 0)
        weights = fusion.weights()
        embedding = fusion.embedding()

        fused = np.empty_like(features)
        worst = 0.0
        for t in range(n_frames):
            label = min(t // self.frames_per_label, labels.n_frames - 1)
            guide = build_guide_tokens(labels.doa[:, label], labels.sed[:, label], embedding, use_sed)
            stage = features[:, t, :].T
            fused[:, t, :] = progressive_fusion([stage], guide, [weights])[0].T
            rows = attention_weights(stage, guide, weights).sum(axis=1)
            worst = max(worst, float(np.max(np.abs(rows - 1.0))))

        save_tensor(self.path(FEATURES_FUSED), fused)
        logger.info(f"Fusion forward pass over {n_frames} frames, max attention row error {worst:.2e}")
        return {'shape': fused.shape, 'max_row_error': worst, 'output': self.path(FEATURES_FUSED)}

    def run(self) -> Dict[str, Any]:
        """
        Полный прогон: симуляция (или готовые записи) -> признаки -> бимформинг -> оценка

        Returns:
            dict: Результаты стадий и отчёт метрик
        """
        results = {'stages': {}, 'report': None}

        if self.config.scene_path:
            results['stages']['simulate'] = self.run_simulate()
        results['stages']['features'] = self.run_features()
        results['stages']['beamform'] = self.run_beamform()
        results['report'] = self.run_evaluate()

        logger.info(f"Pipeline finished: {', '.join(results['stages'])}, evaluate")
        return results


def run_pipeline(config: PipelineConfig) -> Dict[str, Any]:
    """Быстрый запуск полного пайплайна"""
    return SeldPipeline(config).run()
