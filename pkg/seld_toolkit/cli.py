"""
Командный интерфейс SELD Toolkit
"""

import argparse
import logging
import sys

from .core.metrics import relative_improvement, seld_score
from .services.pipeline import SeldPipeline
from .utils.config import (
    PipelineConfig, get_config_template, get_pipeline_section, load_config, save_config,
)
from .utils.log import setup_logging

logger = logging.getLogger('seld_toolkit.cli')

# Флаг командной строки -> поле PipelineConfig
CONFIG_FLAGS = {
    'scene': 'scene_path',
    'foa': 'foa_path',
    'mic': 'mic_path',
    'metadata': 'metadata_path',
    'pred_metadata': 'pred_metadata_path',
    'output_dir': 'output_dir',
    'seed': 'seed',
    'window_s': 'window_s',
    'hop_s': 'hop_s',
    'n_mels': 'n_mels',
    'label_hop_s': 'label_hop_s',
    'n_tracks': 'n_tracks',
    'n_class': 'n_class',
    'speed_of_sound': 'speed_of_sound',
    'wavefront': 'wavefront',
    'activity_threshold_db': 'activity_threshold_db',
    'log_file': 'log_file',
    'log_level': 'log_level',
}


def build_config(args) -> PipelineConfig:
    """Конфигурация из файла и флагов (файл > флаги > умолчания)"""
    file_config = get_pipeline_section(load_config(args.config))
    cli_config = {field: getattr(args, flag, None) for flag, field in CONFIG_FLAGS.items()}
    config = PipelineConfig.from_sources(file_config, cli_config)
    setup_logging(config.log_path, config.log_level)
    return config


def _fail(e: Exception):
    logger.error(f"{type(e).__name__}: {e}")
    print(f"❌ Error: {e}")
    sys.exit(1)


def generate_config(path: str):
    """Генерация шаблона конфигурации"""
    try:
        save_config(get_config_template(), path)
        print("✅ Configuration template generated:")
        print(f"   - {path}")
        print("\n📝 Edit this file, then run: seld-toolkit pipeline --config " + path)
    except Exception as e:
        _fail(e)


def simulate(args):
    """Синтез сцены"""
    try:
        result = SeldPipeline(build_config(args)).run_simulate()
        print(f"✅ Simulated {result['events']} events ({result['label_frames']} label frames)")
        print(f"   - {result['foa']}\n   - {result['mic']}\n   - {result['metadata']}")
    except Exception as e:
        _fail(e)


def features(args):
    """Извлечение признаков и предсказание оракула"""
    try:
        result = SeldPipeline(build_config(args)).run_features()
        print(f"✅ DoA features {result['features_doa']}, SED features {result['features_sed']}")
        print(f"🎯 Oracle active in {result['active_frames']}/{result['label_frames']} label frames")
    except Exception as e:
        _fail(e)


def beamform(args):
    """Бимформинг по предсказанным траекториям"""
    try:
        result = SeldPipeline(build_config(args)).run_beamform()
        print(f"✅ Wrote {len(result['tracks'])} beamformed tracks")
        for item in result['gain_report'] or []:
            print(f"  📡 track {item.track}: SNR {item.input_snr_db:.2f} -> {item.output_snr_db:.2f} dB "
                  f"(gain {item.gain_db:.2f} dB)")
    except Exception as e:
        _fail(e)


def reorder(args):
    """Трековое переупорядочивание метаданных"""
    try:
        result = SeldPipeline(build_config(args)).run_reorder()
        print(f"✅ {result['events']} events on {result['tracks_used']} tracks -> {result['output']}")
    except Exception as e:
        _fail(e)


def print_report(report):
    print("\n📊 SELD Metrics")
    print("=" * 50)
    for line in report.to_key_value().splitlines():
        name, value = line.split('=', 1)
        print(f"  {name:<12} {value}")


def evaluate(args):
    """Оценка предсказания"""
    try:
        print_report(SeldPipeline(build_config(args)).run_evaluate())
    except Exception as e:
        _fail(e)


def pipeline(args):
    """Полный прогон"""
    try:
        results = SeldPipeline(build_config(args)).run()
        print(f"✅ Stages: {', '.join(results['stages'])}, evaluate")
        print_report(results['report'])
    except Exception as e:
        _fail(e)


def fusion(args):
    """Прямой проход слияния"""
    try:
        service = SeldPipeline(build_config(args))
        result = service.run_fusion(use_sed=not args.no_sed, use_beamformed=args.with_bf)
        print(f"✅ Fused features {result['shape']} -> {result['output']}")
        print(f"   Max attention row deviation: {result['max_row_error']:.2e}")
    except Exception as e:
        _fail(e)


def score(args):
    """SELD score из четырёх метрик"""
    try:
        value = seld_score(args.er, args.f, args.le, args.lr)
        print(f"SELD score: {value:.4f}")
        if args.baseline is not None:
            print(f"Relative improvement: {relative_improvement(args.baseline, value):.1f}%")
    except Exception as e:
        _fail(e)


def _add_common(parser):
    parser.add_argument('--config', help='Файл конфигурации (YAML/JSON)')
    parser.add_argument('--scene', help='Описание сцены (JSON/YAML)')
    parser.add_argument('--foa', help='FoA WAV (по умолчанию <output-dir>/foa.wav)')
    parser.add_argument('--mic', help='MIC WAV (по умолчанию <output-dir>/mic.wav)')
    parser.add_argument('--metadata', help='Эталонные метаданные CSV')
    parser.add_argument('--pred-metadata', help='Предсказанные метаданные CSV')
    parser.add_argument('--output-dir', help='Каталог артефактов (env SELD_OUTPUT_DIR)')
    parser.add_argument('--seed', type=int, help='Зерно генератора (перекрывает seed сцены)')
    parser.add_argument('--window-s', type=float, help='Окно STFT, с (0.04)')
    parser.add_argument('--hop-s', type=float, help='Шаг STFT, с (0.02)')
    parser.add_argument('--n-mels', type=int, help='Мел-полос (64)')
    parser.add_argument('--label-hop-s', type=float, help='Шаг кадров меток, с (0.1)')
    parser.add_argument('--n-tracks', type=int, help='Треков K (6)')
    parser.add_argument('--n-class', type=int, help='Классов (13)')
    parser.add_argument('--speed-of-sound', type=float, help='Скорость звука, м/с (343)')
    parser.add_argument('--wavefront', choices=['plane', 'spherical'], help='Модель фронта волны')
    parser.add_argument('--activity-threshold-db', type=float, help='Порог активности оракула, дБ (-40)')
    parser.add_argument('--log-file', help='Файл лога')
    parser.add_argument('--log-level', help='Уровень логирования (INFO)')


def main():
    """Основная функция CLI"""
    parser = argparse.ArgumentParser(
        description='SELD Toolkit CLI - локализация и детекция звуковых событий',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Примеры использования:
  seld-toolkit init                              # Шаблон конфигурации seld.yaml
  seld-toolkit simulate --scene scene.json       # Синтез FoA/MIC и меток
  seld-toolkit features                          # Признаки и предсказание оракула
  seld-toolkit beamform --scene scene.json       # Бимформинг и отчёт о выигрыше ОСШ
  seld-toolkit evaluate                          # Метрики SELD
  seld-toolkit pipeline --scene scene.json --seed 7   # Всё сразу
  seld-toolkit reorder --metadata fold1.csv      # Трековое переупорядочивание
  seld-toolkit score 0.57 29.9 22.0 47.7         # SELD score
        """
    )

    subparsers = parser.add_subparsers(dest='command', help='Команды')

    # Команда init
    init_parser = subparsers.add_parser('init', help='Генерация шаблона конфигурации')
    init_parser.add_argument('--path', default='seld.yaml', help='Куда записать шаблон')

    # Стадии пайплайна
    for name, help_text in (('simulate', 'Синтез сцены'),
                            ('features', 'Признаки и предсказание оракула'),
                            ('beamform', 'Бимформинг по трекам'),
                            ('reorder', 'Трековое переупорядочивание метаданных'),
                            ('evaluate', 'Оценка предсказания'),
                            ('pipeline', 'Полный прогон')):
        _add_common(subparsers.add_parser(name, help=help_text))

    # Команда fusion
    fusion_parser = subparsers.add_parser('fusion', help='Прямой проход слияния признаков')
    _add_common(fusion_parser)
    fusion_parser.add_argument('--no-sed', action='store_true', help='Только DoA-токены')
    fusion_parser.add_argument('--with-bf', action='store_true',
                               help='Добавить log-mel выходов бимформера (после beamform)')

    # Команда score
    score_parser = subparsers.add_parser('score', help='SELD score из ER, F, LE, LR')
    score_parser.add_argument('er', type=float, help='ER (доля)')
    score_parser.add_argument('f', type=float, help='F, %%')
    score_parser.add_argument('le', type=float, help='LE, градусы')
    score_parser.add_argument('lr', type=float, help='LR, %%')
    score_parser.add_argument('--baseline', type=float, help='SELD score базовой системы')

    args = parser.parse_args()

    if not args.command:
        parser.print_help()
        sys.exit(1)

    commands = {
        'simulate': simulate,
        'features': features,
        'beamform': beamform,
        'reorder': reorder,
        'evaluate': evaluate,
        'pipeline': pipeline,
        'fusion': fusion,
        'score': score,
    }

    if args.command == 'init':
        generate_config(args.path)
    else:
        commands[args.command](args)


if __name__ == "__main__":
    main()
