"""Compact binary container for masks and filters.

Layout (little endian)::

    b"MBFC" | version u8 | dtype code u8 | ndim u8 | reserved u8 | shape u64[ndim] | payload

The payload is the C-ordered array in ``<f8`` or ``<c16``; reading back gives
a bit-identical array.
"""
import struct
from pathlib import Path

import numpy as np

from .errors import InvalidInput

MAGIC = b"MBFC"
VERSION = 1
_CODES = {1: np.dtype("<f8"), 2: np.dtype("<c16")}
_DTYPES = {v: k for k, v in _CODES.items()}


def to_bytes(array):
    array = np.asarray(array)
    if np.iscomplexobj(array):
        array = array.astype("<c16", copy=False)
    else:
        array = array.astype("<f8", copy=False)
    header = MAGIC + struct.pack("<BBBB", VERSION, _DTYPES[array.dtype], array.ndim, 0)
    header += struct.pack(f"<{array.ndim}Q", *array.shape)
    return header + np.ascontiguousarray(array).tobytes()


def from_bytes(blob):
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise InvalidInput("not a maskbf container")
    version, code, ndim, _ = struct.unpack_from("<BBBB", blob, 4)
    if version != VERSION or code not in _CODES:
        raise InvalidInput(f"unsupported container version {version} / dtype code {code}")
    shape = struct.unpack_from(f"<{ndim}Q", blob, 8)
    offset = 8 + 8 * ndim
    dtype = _CODES[code]
    count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    if len(blob) - offset != count * dtype.itemsize:
        raise InvalidInput("container payload size does not match its shape header")
    return np.frombuffer(blob, dtype=dtype, count=count, offset=offset).reshape(shape).copy()


def save(path, array):
    Path(path).write_bytes(to_bytes(array))


def load(path):
    return from_bytes(Path(path).read_bytes())
