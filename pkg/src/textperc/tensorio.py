"""Binary tensor file format (.tpt) used for all array interchange.

Layout (little-endian): magic "TPTN", version u32 = 1, rank u32,
dims u32 * rank, dtype u8 (0 = f32, 1 = u8, 2 = i32), then the payload
row-major.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"TPTN"
VERSION = 1

_DTYPE_CODES = {
    np.dtype("<f4"): 0,
    np.dtype("u1"): 1,
    np.dtype("<i4"): 2,
}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}


class TensorFormatError(ValueError):
    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


def write_tensor(path, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array)
    if arr.dtype not in _DTYPE_CODES:
        # canonicalize common types; anything else is a caller bug
        if np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype("<f4")
        elif arr.dtype == np.bool_ or arr.dtype == np.uint8:
            arr = arr.astype("u1")
        elif np.issubdtype(arr.dtype, np.integer):
            arr = arr.astype("<i4")
        else:
            raise TensorFormatError(f"unsupported dtype {arr.dtype}")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(struct.pack("<B", _DTYPE_CODES[arr.dtype]))
        f.write(arr.tobytes())


def read_tensor(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise TensorFormatError("truncated header", offset=len(data))
    if data[:4] != MAGIC:
        raise TensorFormatError("bad magic", offset=0)
    version, rank = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}", offset=4)
    off = 12
    if len(data) < off + 4 * rank + 1:
        raise TensorFormatError("truncated dims", offset=len(data))
    dims = struct.unpack_from(f"<{rank}I", data, off)
    off += 4 * rank
    (code,) = struct.unpack_from("<B", data, off)
    off += 1
    if code not in _CODE_DTYPES:
        raise TensorFormatError(f"unknown dtype code {code}", offset=off - 1)
    dtype = _CODE_DTYPES[code]
    count = int(np.prod(dims)) if rank else 1
    nbytes = count * dtype.itemsize
    if len(data) < off + nbytes:
        raise TensorFormatError("truncated payload", offset=len(data))
    return np.frombuffer(data, dtype=dtype, count=count, offset=off).reshape(dims).copy()
