"""
Кастомные исключения модуля
"""


class SeldError(Exception):
    """Базовое исключение для ошибок тулкита"""
    pass


class RangeError(SeldError):
    """Значение вне допустимого диапазона"""
    pass


class InvariantError(SeldError):
    """Нарушен инвариант входных данных"""
    pass


class UndefinedDistanceError(SeldError):
    """Угловое расстояние не определено (неактивный вектор)"""
    pass


class InsufficientInputError(SeldError):
    """Недостаточно входных данных"""
    pass


class ConfigurationError(SeldError):
    """Ошибка конфигурации"""
    pass


class FormatError(SeldError):
    """Ошибка формата данных или файла"""
    pass


class ShapeError(SeldError):
    """Несовпадение размерностей"""
    pass


class ValidationError(SeldError):
    """Ошибка валидации"""
    pass


class UndefinedMetricError(SeldError):
    """Метрика не определена для данного входа"""
    pass


class ParseError(SeldError):
    """Ошибка разбора файла метаданных"""
    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class TrackOverflowError(SeldError):
    """Событий больше, чем треков"""
    def __init__(self, message, frame=None, event=None):
        super().__init__(message)
        self.frame = frame
        self.event = event
