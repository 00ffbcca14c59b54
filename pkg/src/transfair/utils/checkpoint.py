"""
Binary checkpoint codec.

Layout (all integers little-endian)::

    b"TFR1"  u32 version  u32 array_count
    array_count x { u16 name_len, name (UTF-8), u8 rank, rank x u32 dim, float32 values (row-major) }
    u32 integer_count
    integer_count x { u16 name_len, name (UTF-8), u64 value }

Index arrays (user ids) are stored exactly as u64 entries ``name#i`` plus
``name#count``. Structured metadata (scorer spec, frozen flags, configuration) travels as
UTF-8 JSON bytes stored in the float array ``meta/json``.
"""

import hashlib
import json
import struct
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from loguru import logger

from ..errors import CorruptArtifactError

MAGIC = b"TFR1"
FORMAT_VERSION = 1
META_KEY = "meta/json"
U64_MASK = 0xFFFFFFFFFFFFFFFF


@dataclass
class Checkpoint:
    """Named float arrays, named unsigned integers and a JSON metadata object."""

    arrays: dict[str, np.ndarray] = field(default_factory=dict)
    integers: dict[str, int] = field(default_factory=dict)
    meta: dict[str, Any] = field(default_factory=dict)
    version: int = FORMAT_VERSION

    def add_state(self, state: Mapping[str, np.ndarray], prefix: str = "") -> "Checkpoint":
        for name, value in state.items():
            self.arrays[f"{prefix}{name}"] = np.asarray(value, dtype=np.float64)
        return self

    def state(self, prefix: str) -> dict[str, np.ndarray]:
        """Arrays under ``prefix`` with the prefix stripped."""
        return {name[len(prefix) :]: value for name, value in self.arrays.items() if name.startswith(prefix)}

    def require(self, name: str) -> np.ndarray:
        if name not in self.arrays:
            raise CorruptArtifactError(name, "entry missing from checkpoint")
        return self.arrays[name]

    def add_indices(self, name: str, values: np.ndarray) -> "Checkpoint":
        """Store a 1-D index array exactly, one u64 entry per element under ``name#i``."""
        values = np.asarray(values).reshape(-1)
        if values.size and (not np.issubdtype(values.dtype, np.integer) or values.min() < 0):
            raise ValueError(f"{name}: index arrays must hold non-negative integers")
        self.integers[f"{name}#count"] = int(values.size)
        for position, value in enumerate(values.tolist()):
            self.integers[f"{name}#{position}"] = int(value)
        return self

    def indices(self, name: str) -> np.ndarray:
        count = self.integers.get(f"{name}#count")
        if count is None:
            raise CorruptArtifactError(name, "index array missing from checkpoint")
        try:
            return np.array([self.integers[f"{name}#{i}"] for i in range(count)], dtype=np.int64)
        except KeyError as e:
            raise CorruptArtifactError(name, f"index entry {e.args[0]} missing") from None


def _encode_name(name: str) -> bytes:
    raw = name.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"checkpoint entry name too long: {name[:40]}...")
    return struct.pack("<H", len(raw)) + raw


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    arrays = dict(checkpoint.arrays)
    if checkpoint.meta:
        payload = json.dumps(checkpoint.meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
        arrays[META_KEY] = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)

    parts = [MAGIC, struct.pack("<II", checkpoint.version, len(arrays))]
    for name in sorted(arrays):
        value = np.asarray(arrays[name])
        if value.ndim > 0xFF:
            raise ValueError(f"{name}: rank {value.ndim} cannot be stored")
        parts.append(_encode_name(name))
        parts.append(struct.pack(f"<B{value.ndim}I", value.ndim, *value.shape))
        parts.append(np.ascontiguousarray(value, dtype="<f4").tobytes())
    parts.append(struct.pack("<I", len(checkpoint.integers)))
    for name in sorted(checkpoint.integers):
        parts.append(_encode_name(name))
        parts.append(struct.pack("<Q", int(checkpoint.integers[name]) & U64_MASK))
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise CorruptArtifactError(
                what, f"truncated: need {size} bytes at offset {self.offset}, file has {len(self.data)}"
            )
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str, what: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def name(self, what: str) -> str:
        (length,) = self.unpack("<H", what)
        try:
            return self.take(length, what).decode("utf-8")
        except UnicodeDecodeError as e:
            raise CorruptArtifactError(what, "entry name is not valid UTF-8") from e


def decode_checkpoint(data: bytes) -> Checkpoint:
    """Parse and validate a whole checkpoint; nothing is returned on failure."""
    reader = _Reader(data)
    magic = reader.take(4, "magic")
    if magic != MAGIC:
        raise CorruptArtifactError("magic", f"expected {MAGIC!r}, found {magic!r}")
    version, count = reader.unpack("<II", "header")
    if version != FORMAT_VERSION:
        raise CorruptArtifactError("version", f"unsupported format version {version}")

    arrays: dict[str, np.ndarray] = {}
    for index in range(count):
        name = reader.name(f"entry {index} name")
        (rank,) = reader.unpack("<B", name)
        shape = reader.unpack(f"<{rank}I", f"{name} shape")
        size = int(np.prod(shape, dtype=np.int64))
        raw = reader.take(4 * size, f"{name} values")
        if name in arrays:
            raise CorruptArtifactError(name, "duplicate entry")
        arrays[name] = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)

    (n_integers,) = reader.unpack("<I", "integer count")
    integers: dict[str, int] = {}
    for index in range(n_integers):
        name = reader.name(f"integer {index} name")
        (integers[name],) = reader.unpack("<Q", name)
    if reader.offset != len(data):
        raise CorruptArtifactError("trailing", f"{len(data) - reader.offset} unexpected bytes after the last entry")

    meta: dict[str, Any] = {}
    if META_KEY in arrays:
        try:
            meta = json.loads(arrays.pop(META_KEY).astype(np.uint8).tobytes().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CorruptArtifactError(META_KEY, f"metadata is not valid JSON: {e}") from e
    return Checkpoint(arrays, integers, meta, version)


def save_checkpoint(checkpoint: Checkpoint, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode_checkpoint(checkpoint)
    path.write_bytes(data)
    logger.debug(f"Wrote checkpoint {path} ({len(checkpoint.arrays)} arrays, {len(data)} bytes)")
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CorruptArtifactError("file", f"cannot read {path}: {e}") from e
    checkpoint = decode_checkpoint(data)
    logger.debug(f"Loaded checkpoint {path} ({len(checkpoint.arrays)} arrays)")
    return checkpoint


def round_trip(state: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Values as they come back from a checkpoint (float32 precision)."""
    return {name: np.asarray(value, dtype=np.float32).astype(np.float64) for name, value in state.items()}


def state_digest(*states: Mapping[str, np.ndarray]) -> str:
    """SHA-256 over names, shapes and exact float64 bytes of the given state dicts."""
    digest = hashlib.sha256()
    for index, state in enumerate(states):
        for name in sorted(state):
            value = np.ascontiguousarray(state[name], dtype=np.float64)
            digest.update(f"{index}:{name}:{value.shape}".encode())
            digest.update(value.tobytes())
    return digest.hexdigest()
