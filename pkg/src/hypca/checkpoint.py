"""Versioned binary container for named tensors.

Layout (little endian): magic "HYPC", u32 schema version, u32 entry count,
then per entry: u32 name length + utf-8 name, u8 ndim, u32 dims, float64
row-major payload. Batch-norm running statistics ride along as named buffers
so a reloaded net evaluates identically.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"HYPC"
VERSION = 1


def save_checkpoint(path, items) -> None:
    """Write (name, array) pairs; order is preserved."""
    items = list(items)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(items)))
        for name, arr in items:
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported schema version {version}")
    off = 12
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off:off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = struct.unpack_from("<B", blob, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", blob, off)
        off += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(blob, dtype="<f8", count=size, offset=off).reshape(shape)
        off += 8 * size
        out[name] = arr.copy()
    if off != len(blob):
        raise ValueError(f"{path}: trailing bytes after last tensor")
    return out
