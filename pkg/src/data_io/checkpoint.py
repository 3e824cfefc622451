"""
Named-tensor checkpoints.

Layout (little-endian):

    "MSGC" | version u32 | count u32 | table | CRC32 u32 of the table bytes

where each table entry is

    name length u32 | UTF-8 name | rank u32 | dims u32[rank] | float32 payload

A checkpoint is accompanied by ``<checkpoint>.cfg``, the RunConfig that
describes the network it was saved from.
"""

import struct
import zlib
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from core.errors import (
    BadMagicError, ChecksumError, CheckpointMismatchError, FormatError, TruncatedFileError,
)
from data_io.run_config import parse_config, write_config
from tensor_ops.modules import Module

CHECKPOINT_MAGIC = b"MSGC"
CHECKPOINT_VERSION = 1
_U32 = struct.Struct("<I")


def config_path_for(checkpoint: Path) -> Path:
    checkpoint = Path(checkpoint)
    return checkpoint.with_name(checkpoint.name + ".cfg")


def encode_checkpoint(tensors: Dict[str, np.ndarray]) -> bytes:
    table = bytearray()
    for name, value in tensors.items():
        encoded = name.encode("utf-8")
        array = np.ascontiguousarray(value, dtype="<f4")
        table += _U32.pack(len(encoded)) + encoded
        table += _U32.pack(array.ndim)
        for dim in array.shape:
            table += _U32.pack(dim)
        table += array.tobytes()
    header = CHECKPOINT_MAGIC + _U32.pack(CHECKPOINT_VERSION) + _U32.pack(len(tensors))
    return header + bytes(table) + _U32.pack(zlib.crc32(bytes(table)) & 0xFFFFFFFF)


class _Reader:
    def __init__(self, raw: bytes, offset: int):
        self.raw = raw
        self.offset = offset

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.raw):
            raise TruncatedFileError(f"checkpoint ends inside {what}")
        chunk = self.raw[self.offset:end]
        self.offset = end
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]


def decode_checkpoint(raw: bytes) -> Dict[str, np.ndarray]:
    """
    Parse checkpoint bytes into name -> float32 array.

    Raises:
        BadMagicError, TruncatedFileError, FormatError, ChecksumError
    """
    if len(raw) >= 4 and raw[:4] != CHECKPOINT_MAGIC:
        raise BadMagicError(f"expected magic {CHECKPOINT_MAGIC!r}, found {raw[:4]!r}")
    reader = _Reader(raw, 0)
    reader.take(4, "magic")
    version = reader.u32("header")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    count = reader.u32("header")

    table_start = reader.offset
    tensors: Dict[str, np.ndarray] = {}
    for index in range(count):
        what = f"tensor {index}"
        name_bytes = reader.take(reader.u32(what), what)
        try:
            name = name_bytes.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"tensor {index} name is not UTF-8") from exc
        if name in tensors:
            raise FormatError(f"duplicate tensor name '{name}'")
        rank = reader.u32(what)
        shape = tuple(reader.u32(what) for _ in range(rank))
        size = int(np.prod(shape, dtype=np.int64)) if shape else 1
        payload = reader.take(4 * size, what)
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float32)
    table_end = reader.offset

    stored_crc = reader.u32("checksum")
    if reader.offset != len(raw):
        raise FormatError(f"{len(raw) - reader.offset} trailing bytes after checksum")
    actual_crc = zlib.crc32(raw[table_start:table_end]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise ChecksumError(f"CRC32 mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}")
    return tensors


def save_checkpoint(tensors: Dict[str, np.ndarray], path: Path,
                    run_config: Optional[dict] = None) -> Path:
    """Write a checkpoint (and its sidecar RunConfig when given)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(tensors))
    if run_config is not None:
        write_config(run_config, config_path_for(path))
    return path


def load_checkpoint(path: Path) -> Dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes())


def load_checkpoint_config(path: Path, verbose: bool = False) -> dict:
    """RunConfig stored next to a checkpoint."""
    cfg = config_path_for(path)
    if not cfg.exists():
        raise FileNotFoundError(f"Checkpoint config not found: {cfg}")
    return parse_config(cfg, verbose=verbose)


def load_into(network: Module, tensors: Dict[str, np.ndarray]) -> None:
    """
    Copy checkpoint tensors into a network, promoting to its dtype.

    Raises:
        CheckpointMismatchError: missing, unexpected or mis-shaped tensors
    """
    expected = network.state_dict()
    missing = sorted(set(expected) - set(tensors))
    unexpected = sorted(set(tensors) - set(expected))
    if missing or unexpected:
        raise CheckpointMismatchError(
            f"missing tensors {missing[:5]}, unexpected tensors {unexpected[:5]}")
    for name, value in expected.items():
        if tensors[name].shape != value.shape:
            raise CheckpointMismatchError(
                f"tensor '{name}' has shape {tensors[name].shape}, network expects {value.shape}")
    network.load_state_dict(tensors)
