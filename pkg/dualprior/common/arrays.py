import hashlib
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .constants import ARRAY_FORMAT_VERSION, ARRAY_MAGIC
from .enums import DTypeCode
from .exceptions import CorruptFileError, DatasetNotFoundError

PathLike = Union[str, Path]

_HEADER = struct.Struct("<BBB")  # version, dtype code, ndim
_DIM = struct.Struct("<Q")


def encode_array(array: np.ndarray) -> bytes:
    """Encodes an array in the shared little-endian binary layout.

    Layout: magic bytes, uint8 format version, uint8 dtype code, uint8 ndim, ndim x uint64 shape, raw C-order data.

    Args:
        array (np.ndarray): The array to encode. Its dtype must have a DTypeCode.

    Returns:
        bytes: The encoded array
    """
    array = np.asarray(array)
    code = DTypeCode.from_numpy(array.dtype)
    data = np.ascontiguousarray(array, dtype=np.dtype(code.numpy_dtype).newbyteorder("<"))

    parts = [ARRAY_MAGIC, _HEADER.pack(ARRAY_FORMAT_VERSION, code.value, array.ndim)]
    parts.extend(_DIM.pack(dim) for dim in array.shape)
    parts.append(data.tobytes(order="C"))

    return b"".join(parts)


def decode_array(payload: bytes, source: str = "<bytes>") -> np.ndarray:
    """Decodes bytes produced by encode_array.

    Args:
        payload (bytes): The encoded array.
        source (str): Name of the payload's origin, used in error messages.

    Raises:
        CorruptFileError: If the magic, version, dtype code or data length is wrong.

    Returns:
        np.ndarray: The decoded array, in native byte order
    """
    offset = len(ARRAY_MAGIC)
    if payload[:offset] != ARRAY_MAGIC:
        raise CorruptFileError(source, "bad magic bytes")

    if len(payload) < offset + _HEADER.size:
        raise CorruptFileError(source, "truncated header")

    version, code_value, ndim = _HEADER.unpack_from(payload, offset)
    offset += _HEADER.size

    if version != ARRAY_FORMAT_VERSION:
        raise CorruptFileError(source, f"unsupported format version {version}")

    try:
        code = DTypeCode(code_value)
    except ValueError:
        raise CorruptFileError(source, f"unknown dtype code {code_value}")

    if len(payload) < offset + ndim * _DIM.size:
        raise CorruptFileError(source, "truncated shape header")

    shape = tuple(
        _DIM.unpack_from(payload, offset + i * _DIM.size)[0] for i in range(ndim)
    )
    offset += ndim * _DIM.size

    dtype = np.dtype(code.numpy_dtype).newbyteorder("<")
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(payload) - offset != expected:
        raise CorruptFileError(
            source, f"expected {expected} data bytes, found {len(payload) - offset}"
        )

    array = np.frombuffer(payload, dtype=dtype, offset=offset).reshape(shape)

    return array.astype(dtype.newbyteorder("="), copy=True)


def write_array(path: PathLike, array: np.ndarray) -> str:
    """Writes an array file and returns the sha256 of its bytes"""
    payload = encode_array(array)
    Path(path).write_bytes(payload)

    return hashlib.sha256(payload).hexdigest()


def read_array(path: PathLike) -> np.ndarray:
    """Reads an array file written by write_array.

    Raises:
        DatasetNotFoundError: If the file does not exist.
        CorruptFileError: If the file cannot be decoded.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetNotFoundError(path)

    return decode_array(path.read_bytes(), source=str(path))


def file_checksum(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
