"""Checkpoint records and their on-disk "CDNT" binary form.

Layout (little-endian throughout):

    magic "CDNT" | version u16 | kind u8 | iteration u64 | layer count u16
    per layer:  N_l u32 | N_(l-1) u32 | m u16 | n u16 | t u16
    stored blocks, f64, row-major, grid scan order (replica 0 first)
    RNG cursor u128
    CRC32 u32 of everything above
"""
import logging
import os
import struct
import zlib
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

MAGIC = b"CDNT"
FORMAT_VERSION = 1
KIND_CODES = {"codenet": 0, "replication": 1, "uncoded": 2}
_HEADER = struct.Struct("<4sHBQH")
_LAYER = struct.Struct("<IIHHH")
_CURSOR_BYTES = 16
_CRC = struct.Struct("<I")


class CheckpointError(ValueError):
    """Raised for unreadable, corrupted or mismatched checkpoints."""


@dataclass(frozen=True)
class LayerHeader:
    out_dim: int
    in_dim: int
    m: int
    n: int
    t: int


@dataclass
class Checkpoint:
    kind: str
    iteration: int
    layers: List[LayerHeader]
    blocks: List[np.ndarray] = field(default_factory=list)
    rng_cursor: int = 0

    def flat_blocks(self):
        if not self.blocks:
            return np.zeros(0)
        return np.concatenate([np.asarray(b, dtype=float).ravel() for b in self.blocks])


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    kind = str(getattr(ckpt.kind, "value", ckpt.kind))
    if kind not in KIND_CODES:
        raise CheckpointError(f"unknown strategy kind '{kind}'")
    if not 0 <= ckpt.rng_cursor < 2 ** 128:
        raise CheckpointError("RNG cursor does not fit in 128 bits")
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, KIND_CODES[kind], ckpt.iteration, len(ckpt.layers))]
    for h in ckpt.layers:
        parts.append(_LAYER.pack(h.out_dim, h.in_dim, h.m, h.n, h.t))
    parts.append(ckpt.flat_blocks().astype("<f8").tobytes())
    parts.append(ckpt.rng_cursor.to_bytes(_CURSOR_BYTES, "little"))
    payload = b"".join(parts)
    return payload + _CRC.pack(zlib.crc32(payload) & 0xFFFFFFFF)


def decode_checkpoint(data: bytes) -> Checkpoint:
    if len(data) < _HEADER.size + _CURSOR_BYTES + _CRC.size:
        raise CheckpointError("checkpoint is truncated")
    payload, (crc,) = data[:-_CRC.size], _CRC.unpack(data[-_CRC.size:])
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise CheckpointError("checkpoint CRC mismatch")

    magic, version, kind_code, iteration, count = _HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    kinds = {code: name for name, code in KIND_CODES.items()}
    if kind_code not in kinds:
        raise CheckpointError(f"unknown strategy kind code {kind_code}")

    offset = _HEADER.size
    if len(payload) < offset + count * _LAYER.size + _CURSOR_BYTES:
        raise CheckpointError("checkpoint is truncated")
    layers = []
    for _ in range(count):
        layers.append(LayerHeader(*_LAYER.unpack_from(payload, offset)))
        offset += _LAYER.size

    block_bytes = len(payload) - offset - _CURSOR_BYTES
    if block_bytes % 8:
        raise CheckpointError("block section is not a whole number of f64 values")
    flat = np.frombuffer(payload, dtype="<f8", count=block_bytes // 8, offset=offset).astype(float)
    cursor = int.from_bytes(payload[-_CURSOR_BYTES:], "little")
    return Checkpoint(kinds[kind_code], iteration, layers, [flat], cursor)


class CheckpointManager:
    """Keeps the latest checkpoint in memory and mirrors it to disk when a path is set."""

    def __init__(self, path: Optional[str] = None):
        self.logger = logging.getLogger(__name__)
        self.path = path
        self.latest: Optional[Checkpoint] = None
        self.saved = 0

    def save(self, ckpt: Checkpoint):
        self.latest = ckpt
        self.saved += 1
        if not self.path:
            return
        try:
            directory = os.path.dirname(self.path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            tmp_path = self.path + ".tmp"
            with open(tmp_path, "wb") as f:
                f.write(encode_checkpoint(ckpt))
            os.replace(tmp_path, self.path)
            self.logger.info(f"Checkpoint at iteration {ckpt.iteration} written to {self.path}")
        except OSError as e:
            self.logger.error(f"Error writing checkpoint: {e}")
            raise

    def load(self, path: Optional[str] = None) -> Checkpoint:
        path = path or self.path
        if not path:
            raise CheckpointError("no checkpoint path given")
        try:
            with open(path, "rb") as f:
                ckpt = decode_checkpoint(f.read())
        except OSError as e:
            self.logger.error(f"Error reading checkpoint: {e}")
            raise
        self.logger.info(f"Loaded {ckpt.kind} checkpoint at iteration {ckpt.iteration} from {path}")
        self.latest = ckpt
        return ckpt
