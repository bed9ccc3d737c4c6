"""Binary tensor container.

Layout (all little-endian)::

    b"OBPT" | version u8 = 1 | dtype u8 | ndim u8 | dims u32 * ndim | payload

dtype codes: 0 = float32, 1 = uint8, 2 = int32. The payload is C-order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import TensorFormatError

MAGIC = b"OBPT"
VERSION = 1
DTYPES = {0: np.dtype("<f4"), 1: np.dtype("u1"), 2: np.dtype("<i4")}
_CODES = {v: k for k, v in DTYPES.items()}


def _coerce(array) -> np.ndarray:
    a = np.asarray(array)
    if a.dtype == np.bool_:
        return a.astype("u1")
    if a.dtype.kind == "f":
        return a.astype("<f4")
    if a.dtype.kind in "iu" and a.dtype != np.uint8:
        if a.size and (a.min() < np.iinfo(np.int32).min or a.max() > np.iinfo(np.int32).max):
            raise TensorFormatError("integer values do not fit in int32")
        return a.astype("<i4")
    if a.dtype == np.uint8:
        return a
    raise TensorFormatError(f"unsupported dtype {a.dtype}")


def encode_tensor(array) -> bytes:
    """Serialize an array; floats are stored as float32 and wider ints as int32."""
    a = _coerce(array)
    if a.ndim > 255:
        raise TensorFormatError("too many dimensions")
    header = MAGIC + struct.pack("<BBB", VERSION, _CODES[a.dtype], a.ndim)
    header += struct.pack(f"<{a.ndim}I", *a.shape)
    return header + np.ascontiguousarray(a).tobytes(order="C")


def decode_tensor(buf: bytes) -> np.ndarray:
    if len(buf) < 7 or buf[:4] != MAGIC:
        raise TensorFormatError("bad magic")
    version, code, ndim = struct.unpack_from("<BBB", buf, 4)
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}")
    if code not in DTYPES:
        raise TensorFormatError(f"unknown dtype code {code}")
    offset = 7 + 4 * ndim
    if len(buf) < offset:
        raise TensorFormatError("truncated header")
    dims = struct.unpack_from(f"<{ndim}I", buf, 7)
    dtype = DTYPES[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(buf) - offset != expected:
        raise TensorFormatError(f"payload is {len(buf) - offset} bytes, expected {expected}")
    return np.frombuffer(buf, dtype=dtype, offset=offset).reshape(dims).copy()


def write_tensor(path, array) -> None:
    Path(path).write_bytes(encode_tensor(array))


def read_tensor(path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())
