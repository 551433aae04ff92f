"""QMEK container: a minimal checksummed binary array format.

Layout (all integers little-endian):

    magic   4 bytes  b"QMEK"
    version u32      currently 1
    dtype   u32      1 = float32, 2 = complex64 (interleaved f32), 3 = uint8
    ndim    u32
    dims    ndim x u32
    payload row-major values
    footer  8 bytes: CRC-32 of the payload, then CRC-32 of the header

Writes are atomic (temp file + rename) and reads verify both checksums.
"""

from __future__ import annotations

import os
import struct
import zlib

import numpy as np

MAGIC = b"QMEK"
VERSION = 1
_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<c8"), 3: np.dtype("u1")}


class QmekError(Exception):
    """Malformed, truncated or corrupted container file."""


def _encode_dtype(arr: np.ndarray) -> tuple[int, np.ndarray]:
    if arr.dtype.kind == "f":
        return 1, arr.astype("<f4")
    if arr.dtype.kind == "c":
        return 2, arr.astype("<c8")
    if arr.dtype.kind in ("b", "u", "i"):
        if arr.dtype.kind == "i" and (arr.min() < 0 or arr.max() > 255):
            raise QmekError("integer data does not fit in uint8")
        return 3, arr.astype("u1")
    raise QmekError(f"unsupported dtype {arr.dtype}")


def write_qmek(path, array) -> None:
    """Write an array (float -> f32, complex -> c64, bool/int -> u8)."""
    arr = np.ascontiguousarray(array)
    code, cast = _encode_dtype(arr)
    header = MAGIC + struct.pack("<III", VERSION, code, cast.ndim)
    header += struct.pack(f"<{cast.ndim}I", *cast.shape)
    payload = cast.tobytes(order="C")
    footer = struct.pack("<II", zlib.crc32(payload), zlib.crc32(header))
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.write(footer)
    os.replace(tmp, path)


def read_qmek(path) -> np.ndarray:
    """Read and verify a container; returns the stored array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise QmekError(f"{path}: not a QMEK file")
    version, code, ndim = struct.unpack_from("<III", blob, 4)
    if version != VERSION:
        raise QmekError(f"{path}: unsupported version {version}")
    if code not in _DTYPE_CODES:
        raise QmekError(f"{path}: unknown dtype code {code}")
    header_len = 16 + 4 * ndim
    if len(blob) < header_len + 8:
        raise QmekError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{ndim}I", blob, 16)
    dtype = _DTYPE_CODES[code]
    n_bytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(blob) != header_len + n_bytes + 8:
        raise QmekError(f"{path}: payload length mismatch")
    payload = blob[header_len : header_len + n_bytes]
    crc_payload, crc_header = struct.unpack_from("<II", blob, header_len + n_bytes)
    if zlib.crc32(payload) != crc_payload:
        raise QmekError(f"{path}: payload checksum mismatch")
    if zlib.crc32(blob[:header_len]) != crc_header:
        raise QmekError(f"{path}: header checksum mismatch")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
