"""Binary checkpoint codec.

Layout (little-endian)::

    b"FPMM"  u32 version  32-byte config digest
    repeated until EOF:
        u16 name length, UTF-8 name, u8 rank, u32 × rank dims, f32 × prod(dims) data

Parameters are stored as float32, so a float32 model round-trips bit for bit.
"""

from __future__ import annotations

import logging
import struct
from collections.abc import Iterable
from pathlib import Path

import numpy as np

from fpmm.shared.errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"FPMM"
VERSION = 1
DIGEST_BYTES = 32

_HEADER = struct.Struct("<4sI")


def encode_checkpoint(tensors: Iterable[tuple[str, np.ndarray]], digest: bytes) -> bytes:
    if len(digest) != DIGEST_BYTES:
        raise CheckpointError(f"Config digest must be {DIGEST_BYTES} bytes, got {len(digest)}")
    parts = [_HEADER.pack(MAGIC, VERSION), digest]
    seen: set[str] = set()
    for name, array in tensors:
        if name in seen:
            raise CheckpointError(f"Duplicate tensor name '{name}'")
        seen.add(name)
        encoded = name.encode("utf-8")
        array = np.asarray(array)
        if len(encoded) > 0xFFFF or array.ndim > 0xFF:
            raise CheckpointError(f"Tensor '{name}' cannot be encoded (name or rank too large)")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack(f"<B{array.ndim}I", array.ndim, *array.shape))
        parts.append(np.ascontiguousarray(array, dtype="<f4").tobytes())
    return b"".join(parts)


def decode_checkpoint(data: bytes) -> tuple[bytes, dict[str, np.ndarray]]:
    """Return ``(digest, tensors)``; tensors keep file order."""
    if len(data) < _HEADER.size + DIGEST_BYTES:
        raise CheckpointError("Checkpoint is truncated: header incomplete")
    magic, version = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise CheckpointError(f"Not a checkpoint file (magic {magic!r})")
    if version != VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {version}")
    pos = _HEADER.size
    digest = data[pos : pos + DIGEST_BYTES]
    pos += DIGEST_BYTES

    tensors: dict[str, np.ndarray] = {}
    try:
        while pos < len(data):
            (name_len,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<B", data, pos)
            pos += 1
            dims = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            count = int(np.prod(dims, dtype=np.int64))
            if pos + 4 * count > len(data):
                raise CheckpointError(f"Checkpoint is truncated inside tensor '{name}'")
            tensors[name] = np.frombuffer(data, dtype="<f4", count=count, offset=pos).reshape(dims).copy()
            pos += 4 * count
    except (struct.error, UnicodeDecodeError) as exc:
        raise CheckpointError(f"Malformed checkpoint: {exc}") from exc
    return digest, tensors


def save_checkpoint(path: str | Path, tensors: Iterable[tuple[str, np.ndarray]], digest: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(tensors, digest))
    logger.info("Checkpoint written to %s", path)


def load_checkpoint(path: str | Path, expected_digest: bytes | None = None) -> dict[str, np.ndarray]:
    """Read a checkpoint; a digest differing from ``expected_digest`` is an error."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    digest, tensors = decode_checkpoint(path.read_bytes())
    if expected_digest is not None and digest != expected_digest:
        raise CheckpointError(
            f"Checkpoint {path} was trained with a different architecture config "
            f"(digest {digest.hex()[:12]}…, expected {expected_digest.hex()[:12]}…)"
        )
    return tensors
