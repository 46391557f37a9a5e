"""Versioned binary weight checkpoints.

Layout (all little-endian)::

    b"HQSLCKPT" | version u8 | count u32
    per tensor: name_len u16 | name utf-8 | rank u8 | dims u32 * rank | float64 data
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"HQSLCKPT"
VERSION = 1


def encode_tensors(named: dict) -> bytes:
    out = [MAGIC, struct.pack("<BI", VERSION, len(named))]
    for name, arr in named.items():
        arr = np.asarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)) + raw)
        out.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(out)


def decode_tensors(blob: bytes) -> dict:
    if blob[:8] != MAGIC:
        raise ValueError("not a checkpoint file (bad magic)")
    version, count = struct.unpack_from("<BI", blob, 8)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    pos = 13
    named = {}
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos : pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<B", blob, pos)
            pos += 1
            shape = struct.unpack_from(f"<{rank}I", blob, pos)
            pos += 4 * rank
            size = int(np.prod(shape)) if rank else 1
            if pos + 8 * size > len(blob):
                raise ValueError("truncated checkpoint")
            named[name] = np.frombuffer(blob, dtype="<f8", count=size, offset=pos).reshape(shape).copy()
            pos += 8 * size
    except struct.error as exc:
        raise ValueError("truncated checkpoint") from exc
    return named


def save_parameters(path, params):
    named = {}
    for p in params:
        if p.name in named:
            raise ValueError(f"duplicate parameter name {p.name!r}")
        named[p.name] = p.value
    Path(path).write_bytes(encode_tensors(named))


def load_parameters(path, params):
    """Copy stored tensors into ``params`` (matched by name, shapes must agree)."""
    named = decode_tensors(Path(path).read_bytes())
    for p in params:
        if p.name not in named:
            raise KeyError(f"checkpoint has no tensor {p.name!r}")
        if named[p.name].shape != p.value.shape:
            raise ValueError(f"shape mismatch for {p.name}: {named[p.name].shape} vs {p.value.shape}")
        p.value[...] = named[p.name]
