"""Binary parameter checkpoints.

Layout (little-endian)::

    b"CTDL" | u32 version | u32 n_records
    per record: u32 name_len | name (utf-8) | u32 ndim | u64 dims[ndim] | f64 values[prod(dims)]
"""
from __future__ import annotations

import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

from ..errors import DimensionError

MAGIC = b"CTDL"
VERSION = 1


def dumps(records) -> bytes:
    items = list(records.items()) if isinstance(records, dict) else list(records)
    chunks = [MAGIC, struct.pack("<II", VERSION, len(items))]
    for name, values in items:
        arr = np.asarray(values, dtype="<f8")
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.tobytes(order="C"))
    return b"".join(chunks)


def loads(blob: bytes) -> "OrderedDict[str, np.ndarray]":
    if blob[:4] != MAGIC:
        raise DimensionError("not a checkpoint (bad magic)")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise DimensionError(f"unsupported checkpoint version {version}")
    off = 12
    out = OrderedDict()
    for _ in range(count):
        (n,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off:off + n].decode("utf-8")
        off += n
        (ndim,) = struct.unpack_from("<I", blob, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}Q", blob, off)
        off += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        out[name] = np.frombuffer(blob, dtype="<f8", count=size, offset=off).reshape(shape).astype(np.float64)
        off += 8 * size
    if off != len(blob):
        raise DimensionError("trailing bytes in checkpoint")
    return out


def save(path, records) -> None:
    Path(path).write_bytes(dumps(records))


def load(path) -> "OrderedDict[str, np.ndarray]":
    return loads(Path(path).read_bytes())
