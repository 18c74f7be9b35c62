"""
UIM1 tensor container.

Layout (little-endian):
    magic "UIM1" | version u32 | tensor count u32
    per tensor: name length u16 | UTF-8 name | ndim u32 | dims u32[ndim] | float32 values
    CRC32 of every preceding byte (u32)

Used for checkpoints and for the measurement records of a dataset directory.
"""
import logging
import struct
import zlib
from pathlib import Path
from typing import Dict, Mapping, Union

import numpy as np

from .constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from .exceptions import CheckpointError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def encode_tensors(tensors: Mapping[str, np.ndarray]) -> bytes:
    """Serialize named arrays to UIM1 bytes"""
    parts = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(tensors))]
    for name, array in tensors.items():
        raw_name = name.encode("utf-8")
        if len(raw_name) > 0xFFFF:
            raise CheckpointError(f"Tensor name too long: {name[:40]}...")
        values = np.ascontiguousarray(np.asarray(array), dtype="<f4")
        parts.append(struct.pack("<H", len(raw_name)))
        parts.append(raw_name)
        parts.append(struct.pack("<I", values.ndim))
        parts.append(struct.pack(f"<{values.ndim}I", *values.shape))
        parts.append(values.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def decode_tensors(blob: bytes) -> Dict[str, np.ndarray]:
    """Parse UIM1 bytes, validating magic, version and CRC"""
    if len(blob) < 16:
        raise CheckpointError("Tensor file truncated")
    body, (stored_crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
        raise CheckpointError("CRC mismatch - tensor file is corrupted")
    if body[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"Bad magic {body[:4]!r}")
    version, count = struct.unpack_from("<II", body, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"Unsupported container version {version}")

    tensors: Dict[str, np.ndarray] = {}
    offset = 12
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", body, offset)
            offset += 2
            name = body[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (ndim,) = struct.unpack_from("<I", body, offset)
            offset += 4
            dims = struct.unpack_from(f"<{ndim}I", body, offset)
            offset += 4 * ndim
            size = int(np.prod(dims, dtype=np.int64)) if ndim else 1
            values = np.frombuffer(body, dtype="<f4", count=size, offset=offset)
            offset += 4 * size
            tensors[name] = values.reshape(dims).astype(np.float32)
    except (struct.error, ValueError, UnicodeDecodeError) as e:
        raise CheckpointError(f"Malformed tensor file: {str(e)}")
    if offset != len(body):
        raise CheckpointError("Trailing bytes after last tensor")
    return tensors


def save_tensors(path: PathLike, tensors: Mapping[str, np.ndarray]) -> None:
    """Write named arrays to a UIM1 file"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_tensors(tensors))
    logger.debug(f"Wrote {len(tensors)} tensors to {path}")


def load_tensors(path: PathLike) -> Dict[str, np.ndarray]:
    """Read a UIM1 file"""
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"Tensor file not found: {path}")
    return decode_tensors(path.read_bytes())
