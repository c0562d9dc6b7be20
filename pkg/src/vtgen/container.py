"""Binary array container (``.xmdg``).

Layout, all little-endian::

    b"XMDG" | version u32 | rank u32 | dims u32 * rank | dtype tag u32 | payload

The only dtype tag is ``1`` (float32); the payload is row-major.
"""

import struct
from pathlib import Path

import numpy as np

from vtgen.errors import ValidationError

MAGIC = b"XMDG"
FORMAT_VERSION = 1
DTYPE_F32 = 1


def encode_array(array) -> bytes:
    arr = np.asarray(array)
    if arr.ndim == 0:
        raise ValidationError("container needs rank >= 1")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    header = MAGIC + struct.pack("<II", FORMAT_VERSION, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    header += struct.pack("<I", DTYPE_F32)
    return header + arr.tobytes(order="C")


def decode_array(blob: bytes) -> np.ndarray:
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise ValidationError("not an XMDG container (bad magic)")
    version, rank = struct.unpack_from("<II", blob, 4)
    if version != FORMAT_VERSION:
        raise ValidationError(f"unsupported container version {version}")
    if rank == 0:
        raise ValidationError("container rank must be >= 1")
    offset = 12
    dims = struct.unpack_from(f"<{rank}I", blob, offset)
    offset += 4 * rank
    (tag,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if tag != DTYPE_F32:
        raise ValidationError(f"unknown dtype tag {tag}")
    count = int(np.prod(dims))
    if len(blob) - offset != 4 * count:
        raise ValidationError(
            f"payload size {len(blob) - offset} does not match dims {dims}"
        )
    return np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(dims).copy()


def save_array(path, array) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_array(array))
    return path


def load_array(path) -> np.ndarray:
    return decode_array(Path(path).read_bytes())
