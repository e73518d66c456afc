"""
TensorFile Format

Minimal little-endian container for n-dimensional arrays:

    magic    4 bytes  b"PMRT"
    version  u16      1
    dtype    u8       1 = u16, 2 = f32
    ndim     u8
    dims     u32 x ndim
    payload  row-major, little-endian

float64 input is stored as f32. Other dtypes are rejected.
"""

import logging
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from polarsep.utils.validation import FormatError

logger = logging.getLogger(__name__)

MAGIC = b"PMRT"
VERSION = 1
DTYPE_CODES = {1: np.dtype("<u2"), 2: np.dtype("<f4")}
CODE_FOR_KIND = {"u16": 1, "f32": 2}
MAX_PAYLOAD_BYTES = 2**34
_PREFIX = struct.Struct("<4sHBB")

PathLike = Union[str, Path]


def _code_for(array: np.ndarray, dtype: Optional[str]) -> int:
    if dtype is not None:
        if dtype not in CODE_FOR_KIND:
            raise FormatError(f"unsupported tensor dtype {dtype!r}; expected one of {sorted(CODE_FOR_KIND)}")
        return CODE_FOR_KIND[dtype]
    if array.dtype == np.uint16:
        return 1
    if array.dtype in (np.float32, np.float64):
        return 2
    raise FormatError(f"cannot store arrays of dtype {array.dtype}; convert to uint16 or float32")


def _payload_size(dims, itemsize: int) -> int:
    size = itemsize
    for d in dims:
        size *= int(d)
        if size > MAX_PAYLOAD_BYTES:
            raise FormatError(f"tensor dims {tuple(dims)} overflow the {MAX_PAYLOAD_BYTES}-byte payload limit")
    return size


def encode_tensor(array: np.ndarray, dtype: Optional[str] = None) -> bytes:
    """Serialize an array to TensorFile bytes."""
    array = np.asarray(array)
    code = _code_for(array, dtype)
    target = DTYPE_CODES[code]
    if array.ndim > 255:
        raise FormatError(f"too many dimensions ({array.ndim})")
    if any(d >= 2**32 for d in array.shape):
        raise FormatError(f"dimension too large for u32: {array.shape}")
    _payload_size(array.shape, target.itemsize)

    if code == 1:
        if array.size and (np.min(array) < 0 or np.max(array) > 65535 or not np.array_equal(array, np.rint(array))):
            raise FormatError("u16 tensors need integer values in [0, 65535]")
    payload = np.ascontiguousarray(array.astype(target, copy=False)).tobytes()
    header = _PREFIX.pack(MAGIC, VERSION, code, array.ndim) + struct.pack(f"<{array.ndim}I", *array.shape)
    return header + payload


def decode_tensor(buffer: bytes) -> np.ndarray:
    """Parse TensorFile bytes, validating magic, version, dtype and payload length."""
    if len(buffer) < _PREFIX.size:
        raise FormatError(f"truncated header ({len(buffer)} bytes)")
    magic, version, code, ndim = _PREFIX.unpack_from(buffer, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}; not a TensorFile")
    if version != VERSION:
        raise FormatError(f"unsupported TensorFile version {version}")
    if code not in DTYPE_CODES:
        raise FormatError(f"unknown dtype code {code}")

    dims_end = _PREFIX.size + 4 * ndim
    if len(buffer) < dims_end:
        raise FormatError("truncated dimension table")
    dims = struct.unpack_from(f"<{ndim}I", buffer, _PREFIX.size)
    dtype = DTYPE_CODES[code]
    expected = _payload_size(dims, dtype.itemsize)
    actual = len(buffer) - dims_end
    if actual < expected:
        raise FormatError(f"truncated payload: expected {expected} bytes, found {actual}")
    if actual > expected:
        raise FormatError(f"trailing data: expected {expected} bytes, found {actual}")
    data = np.frombuffer(buffer, dtype=dtype, offset=dims_end, count=int(np.prod(dims, dtype=np.int64)))
    return data.reshape(dims).astype(dtype.newbyteorder("="))


def write_tensor(path: PathLike, tensor: np.ndarray, dtype: Optional[str] = None) -> None:
    """
    Write an array as a TensorFile.

    Args:
        path: Output path
        tensor: uint16, float32 or float64 array
        dtype: Force "u16" or "f32"
    """
    Path(path).write_bytes(encode_tensor(tensor, dtype))
    logger.debug(f"Wrote tensor {np.shape(tensor)} to {path}")


def read_tensor(path: PathLike) -> np.ndarray:
    """Read a TensorFile into a native-endian array."""
    return decode_tensor(Path(path).read_bytes())
