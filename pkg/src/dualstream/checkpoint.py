"""Versioned binary model checkpoints.

Layout (all integers little-endian):

    magic   "VBNC" (4 bytes)
    version u32
    cfg_len u32, then cfg_len bytes of JSON (the ModelConfig, sorted keys)
    n       u32 parameter count
    n times: name_len u16, name UTF-8, ndim u8, ndim x u32 dims,
             float64 data, row-major
    crc     u32 CRC-32 of everything before it
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    ChecksumError,
    ConfigError,
    FormatError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from .model import DualStreamModel, ModelConfig

__all__ = ["CHECKPOINT_MAGIC", "CHECKPOINT_VERSION", "save_checkpoint", "load_checkpoint"]

CHECKPOINT_MAGIC = b"VBNC"
CHECKPOINT_VERSION = 1


def save_checkpoint(model: DualStreamModel, path: str | Path) -> Path:
    path = Path(path)
    cfg_blob = json.dumps(model.config.to_dict(), sort_keys=True).encode("utf-8")
    named = model.named_parameters()
    chunks = [
        CHECKPOINT_MAGIC,
        struct.pack("<I", CHECKPOINT_VERSION),
        struct.pack("<I", len(cfg_blob)),
        cfg_blob,
        struct.pack("<I", len(named)),
    ]
    for name, param in named:
        name_bytes = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(struct.pack("<B", param.data.ndim))
        chunks.append(struct.pack(f"<{param.data.ndim}I", *param.data.shape))
        chunks.append(param.data.astype("<f8", copy=False).tobytes())
    body = b"".join(chunks)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(body + struct.pack("<I", zlib.crc32(body)))
    return path


class _Reader:
    def __init__(self, blob: bytes, path: Path):
        self.blob = blob
        self.path = path
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedFileError(
                f"{self.path}: needed {n} bytes at offset {self.pos}, "
                f"file has {len(self.blob)}"
            )
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path: str | Path) -> DualStreamModel:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 4:
        raise TruncatedFileError(f"{path}: too short for a checkpoint")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    body = blob[:-4]
    if zlib.crc32(body) != stored_crc:
        raise ChecksumError(f"{path}: checkpoint CRC mismatch")

    r = _Reader(body, path)
    magic = r.take(4)
    if magic != CHECKPOINT_MAGIC:
        raise BadMagicError(f"{path}: expected magic {CHECKPOINT_MAGIC!r}, found {magic!r}")
    (version,) = r.unpack("<I")
    if version != CHECKPOINT_VERSION:
        raise UnsupportedVersionError(
            f"{path}: file version {version}, this build reads version {CHECKPOINT_VERSION}"
        )
    (cfg_len,) = r.unpack("<I")
    try:
        config = ModelConfig.from_dict(json.loads(r.take(cfg_len).decode("utf-8")))
    except (ValueError, TypeError) as e:
        if isinstance(e, ConfigError):
            raise
        raise FormatError(f"{path}: malformed config block: {e}") from e

    model = DualStreamModel.build(config)
    expected = dict(model.named_parameters())
    (count,) = r.unpack("<I")
    if count != len(expected):
        raise FormatError(
            f"{path}: checkpoint holds {count} parameters, model needs {len(expected)}"
        )
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        n_values = int(np.prod(shape)) if ndim else 1
        values = np.frombuffer(r.take(8 * n_values), dtype="<f8").reshape(shape)
        param = expected.get(name)
        if param is None:
            raise FormatError(f"{path}: unknown parameter {name!r}")
        if param.data.shape != values.shape:
            raise FormatError(
                f"{path}: parameter {name!r} has shape {list(values.shape)}, "
                f"model expects {list(param.data.shape)}"
            )
        param.data[...] = values
    if r.pos != len(body):
        raise FormatError(f"{path}: {len(body) - r.pos} trailing bytes")
    return model
