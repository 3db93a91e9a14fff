"""Versioned binary checkpoint.

Layout (little-endian)::

    magic    8 bytes  b"RTWINCKP"
    version  uint32
    count    uint32
    count x { name_len uint32, name utf-8, rank uint32, dims uint32[rank], data float32[prod(dims)] }
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"RTWINCKP"
VERSION = 1


class CheckpointError(ValueError):
    pass


def encode(state: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(state))]
    for name, arr in state.items():
        arr = np.asarray(arr)
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(arr.astype("<f4").tobytes())
    return b"".join(parts)


def decode(payload: bytes) -> dict[str, np.ndarray]:
    if payload[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    try:
        version, count = struct.unpack_from("<II", payload, 8)
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        off = 16
        state = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", payload, off)
            off += 4
            name = payload[off:off + nlen].decode("utf-8")
            off += nlen
            (rank,) = struct.unpack_from("<I", payload, off)
            off += 4
            dims = struct.unpack_from(f"<{rank}I", payload, off)
            off += 4 * rank
            n = int(np.prod(dims)) if rank else 1
            if off + 4 * n > len(payload):
                raise CheckpointError(f"{name}: truncated data")
            state[name] = np.frombuffer(payload, dtype="<f4", count=n, offset=off).reshape(dims).copy()
            off += 4 * n
    except struct.error as exc:
        raise CheckpointError(f"truncated checkpoint: {exc}") from exc
    if off != len(payload):
        raise CheckpointError(f"{len(payload) - off} trailing bytes")
    return state


def save(path, state: dict[str, np.ndarray]) -> None:
    from ..dataset import atomic_write_bytes
    atomic_write_bytes(Path(path), encode(state))


def load(path) -> dict[str, np.ndarray]:
    return decode(Path(path).read_bytes())
