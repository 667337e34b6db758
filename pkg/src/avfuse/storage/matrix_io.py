"""
Binary matrix files.

Layout: 8-byte magic b"AVFMTX01", rows and cols as u64 little-endian,
then rows*cols float32 little-endian values in row-major order.
"""

import struct
from pathlib import Path

import numpy as np

from avfuse.core.numeric import as_matrix
from avfuse.exceptions import FormatError
from avfuse.storage.files import atomic_write_bytes, read_bytes

MATRIX_MAGIC = b"AVFMTX01"
_HEADER = struct.Struct("<8sQQ")
# Anything larger cannot be a real feature matrix
MAX_VALUES = 1 << 34


def encode_matrix(matrix: np.ndarray) -> bytes:
    matrix = as_matrix(matrix)
    rows, cols = matrix.shape
    return _HEADER.pack(MATRIX_MAGIC, rows, cols) + matrix.astype("<f4").tobytes(order="C")


def decode_matrix(data: bytes, source: str = "<bytes>") -> np.ndarray:
    if len(data) < len(MATRIX_MAGIC) or data[: len(MATRIX_MAGIC)] != MATRIX_MAGIC:
        raise FormatError(f"{source}: bad magic")
    if len(data) < _HEADER.size:
        raise FormatError(f"{source}: truncated header")
    _, rows, cols = _HEADER.unpack_from(data)
    count = rows * cols
    if count > MAX_VALUES:
        raise FormatError(f"{source}: shape overflow ({rows} x {cols})")
    payload = memoryview(data)[_HEADER.size :]
    if len(payload) < 4 * count:
        raise FormatError(f"{source}: truncated payload ({len(payload) // 4} of {count} values)")
    if len(payload) > 4 * count:
        raise FormatError(f"{source}: trailing bytes after {count} values")
    values = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(rows, cols)
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{source}: non-finite values")
    return values


def write_matrix(path: str | Path, matrix: np.ndarray) -> None:
    atomic_write_bytes(path, encode_matrix(matrix))


def read_matrix(path: str | Path) -> np.ndarray:
    return decode_matrix(read_bytes(path), str(path))
