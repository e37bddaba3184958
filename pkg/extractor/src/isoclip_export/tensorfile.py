"""Writer for the binary tensor format the analysis side consumes.

Layout (little-endian): b"ISO1", u8 version=1, u8 dtype code
(0 = float32, 1 = float64, 2 = int64), u32 ndim, ndim x u64 dims, then the
densely packed row-major payload. This is implemented independently here;
interop is guaranteed by the format, not by sharing code.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"ISO1"
VERSION = 1
CODES = {np.dtype("<f4"): 0, np.dtype("<f8"): 1, np.dtype("<i8"): 2}


def write_tensor(path, array) -> None:
    arr = np.ascontiguousarray(array)
    if arr.ndim not in (1, 2):
        raise ValueError(f"only 1-D/2-D tensors are exported, got ndim={arr.ndim}")
    code = CODES.get(arr.dtype)
    if code is None:
        raise ValueError(f"unsupported export dtype {arr.dtype}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BBI", VERSION, code, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(arr.tobytes(order="C"))


def read_tensor(path) -> np.ndarray:
    """Minimal reader used only for the extractor's own verification."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic")
    version, code, ndim = struct.unpack_from("<BBI", raw, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    dtype = {v: k for k, v in CODES.items()}[code]
    dims = struct.unpack_from(f"<{ndim}Q", raw, 10)
    return np.frombuffer(raw[10 + 8 * ndim:], dtype=dtype).reshape(dims).copy()
