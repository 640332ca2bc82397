"""Portable binary checkpoints.

Layout (all integers little-endian):

    magic          4 bytes, b"HJNN"
    version        u8, currently 1
    arch id        u16 length + UTF-8 bytes
    input contract u16 length + UTF-8 bytes, e.g. "tfidf_vector:513"
    manifest hash  u16 length + UTF-8 bytes (hex SHA-256 of the featurizer
                   manifest the model was trained against)
    tensor count   u32
    per tensor:    u16 name length + UTF-8 name, u8 ndim, u32 per extent,
                   then row-major float64 data

Tensors serialize in the network's parameter order, so identical models
produce identical files.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"HJNN"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class CheckpointData:
    arch_id: str
    input_contract: str
    manifest_hash: str
    tensors: dict[str, np.ndarray]


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise CheckpointError(f"string too long to encode ({len(raw)} bytes)")
    return struct.pack("<H", len(raw)) + raw


def checkpoint_bytes(data: CheckpointData) -> bytes:
    parts = [MAGIC, struct.pack("<B", VERSION)]
    parts.append(_pack_str(data.arch_id))
    parts.append(_pack_str(data.input_contract))
    parts.append(_pack_str(data.manifest_hash))
    parts.append(struct.pack("<I", len(data.tensors)))
    for name, tensor in data.tensors.items():
        arr = np.ascontiguousarray(tensor, dtype=np.float64)
        parts.append(_pack_str(name))
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype("<f8").tobytes())
    return b"".join(parts)


def save_checkpoint(path: str | Path, data: CheckpointData) -> None:
    Path(path).write_bytes(checkpoint_bytes(data))


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise CheckpointError("truncated checkpoint")
        chunk = self.raw[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self) -> str:
        return self.take(self.u16()).decode("utf-8")


def load_checkpoint(path: str | Path) -> CheckpointData:
    reader = _Reader(Path(path).read_bytes())
    if reader.take(4) != MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint (bad magic)")
    version = reader.u8()
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    arch_id = reader.string()
    contract = reader.string()
    manifest_hash = reader.string()
    tensors: dict[str, np.ndarray] = {}
    for _ in range(reader.u32()):
        name = reader.string()
        ndim = reader.u8()
        shape = tuple(reader.u32() for _ in range(ndim))
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(reader.take(count * 8), dtype="<f8").astype(np.float64)
        tensors[name] = data.reshape(shape)
    return CheckpointData(arch_id=arch_id, input_contract=contract,
                          manifest_hash=manifest_hash, tensors=tensors)
