"""Binary tensor format.

Layout: ``b"VGT1"``, u32 rank, rank x u64 extents, then the float64
payload in row-major order. All integers and floats are little-endian.
"""

from __future__ import annotations

import io
import struct
from typing import BinaryIO

import numpy as np

from voxgrad.autodiff.tensor import Tensor

TENSOR_MAGIC = b"VGT1"


class FormatError(ValueError):
    """Raised for malformed tensor or checkpoint files."""


def write_tensor(fh: BinaryIO, t: Tensor | np.ndarray) -> None:
    arr = t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)
    fh.write(TENSOR_MAGIC)
    fh.write(struct.pack("<I", arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated file while reading {what}: wanted {n} bytes, got {len(buf)}")
    return buf


def read_tensor(fh: BinaryIO) -> Tensor:
    magic = _read_exact(fh, 4, "tensor magic")
    if magic != TENSOR_MAGIC:
        raise FormatError(f"bad tensor magic {magic!r}, expected {TENSOR_MAGIC!r}")
    (rank,) = struct.unpack("<I", _read_exact(fh, 4, "rank"))
    shape = struct.unpack(f"<{rank}Q", _read_exact(fh, 8 * rank, "extents"))
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    payload = _read_exact(fh, 8 * count, "payload")
    arr = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)
    return Tensor.wrap(arr)


def tensor_to_bytes(t: Tensor | np.ndarray) -> bytes:
    buf = io.BytesIO()
    write_tensor(buf, t)
    return buf.getvalue()


def tensor_from_bytes(data: bytes) -> Tensor:
    return read_tensor(io.BytesIO(data))


def save_tensor(path, t: Tensor | np.ndarray) -> None:
    with open(path, "wb") as fh:
        write_tensor(fh, t)


def load_tensor(path) -> Tensor:
    with open(path, "rb") as fh:
        return read_tensor(fh)
