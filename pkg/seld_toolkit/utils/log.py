"""
Настройка логирования
"""
import logging
import os
from typing import Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(log_file: Optional[str] = None, level: str = 'INFO') -> logging.Logger:
    """
    Настройка корневого логгера пакета

    Args:
        log_file (str): Путь к файлу лога (None - только консоль)
        level (str): Уровень логирования

    Returns:
        logging.Logger: Логгер пакета
    """
    root = logging.getLogger('seld_toolkit')
    root.setLevel(getattr(logging, str(level).upper(), logging.INFO))
    py_warnings = logging.getLogger('py.warnings')

    # Повторный вызов не должен дублировать обработчики
    for handler in list(root.handlers):
        root.removeHandler(handler)
        py_warnings.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(LOG_FORMAT)

    console = logging.StreamHandler()
    console.setFormatter(formatter)
    console.setLevel(logging.WARNING)
    root.addHandler(console)

    if log_file:
        directory = os.path.dirname(log_file)
        if directory:
            os.makedirs(directory, exist_ok=True)
        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)

    # Предупреждения librosa (пустые мел-фильтры и т.п.) тоже идут в лог
    logging.captureWarnings(True)
    for handler in root.handlers:
        py_warnings.addHandler(handler)

    return root
