"""
Бинарный формат тензоров SELDTNSR

Заголовок: магическая строка "SELDTNSR", число измерений и размеры
(little-endian uint32), затем данные float32 little-endian в порядке row-major.
"""
import os

import numpy as np

from ..utils.exceptions import FormatError

MAGIC = b'SELDTNSR'


def save_tensor(path: str, array: np.ndarray):
    """Сохранить массив в формате SELDTNSR"""
    array = np.asarray(array)
    if np.iscomplexobj(array):
        raise FormatError("SELDTNSR stores real tensors only")

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    header = MAGIC + np.array([array.ndim, *array.shape], dtype='<u4').tobytes()
    with open(path, 'wb') as f:
        f.write(header)
        f.write(np.ascontiguousarray(array, dtype='<f4').tobytes())


def load_tensor(path: str) -> np.ndarray:
    """Загрузить массив float32 из файла SELDTNSR"""
    try:
        with open(path, 'rb') as f:
            payload = f.read()
    except OSError as e:
        raise FormatError(f"Cannot read tensor file {path}: {e}") from e

    if payload[:len(MAGIC)] != MAGIC:
        raise FormatError(f"{path} is not a SELDTNSR file")

    offset = len(MAGIC)
    if len(payload) < offset + 4:
        raise FormatError(f"{path}: truncated header")
    ndim = int(np.frombuffer(payload, dtype='<u4', count=1, offset=offset)[0])
    offset += 4

    if len(payload) < offset + 4 * ndim:
        raise FormatError(f"{path}: truncated dimensions")
    shape = tuple(int(d) for d in np.frombuffer(payload, dtype='<u4', count=ndim, offset=offset))
    offset += 4 * ndim

    expected = int(np.prod(shape, dtype=np.int64)) * 4
    if len(payload) - offset != expected:
        raise FormatError(f"{path}: expected {expected} data bytes, found {len(payload) - offset}")

    return np.frombuffer(payload, dtype='<f4', offset=offset).reshape(shape).astype(np.float32)
