"""Binary checkpoint files.

Layout (all integers little endian):

    magic        8 bytes  b"UAMCKPT\\x00"
    version      uint32
    meta_len     uint32, followed by meta_len bytes of UTF-8 JSON metadata
    n_arrays     uint32
    per array:   name_len uint16, name (UTF-8), ndim uint8,
                 shape (ndim x uint64), data (float64, C order)
    checksum     uint32, CRC-32 of every preceding byte
"""
from __future__ import annotations

import json
import os
import struct
import zlib

import numpy as np

MAGIC = b"UAMCKPT\x00"
VERSION = 1


class CheckpointError(IOError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


def encode(arrays: dict, metadata: dict | None = None) -> bytes:
    meta = json.dumps(metadata or {}, sort_keys=True).encode()
    parts = [MAGIC, struct.pack("<II", VERSION, len(meta)), meta, struct.pack("<I", len(arrays))]
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f8")
        raw_name = name.encode()
        parts.append(struct.pack("<HB", len(raw_name), arr.ndim))
        parts.append(raw_name)
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def decode(blob: bytes) -> tuple[dict, dict]:
    if len(blob) < len(MAGIC) + 16 or blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    version, meta_len = struct.unpack_from("<II", body, len(MAGIC))
    if version != VERSION:
        raise CheckpointVersionError(f"checkpoint version {version} unsupported (expected {VERSION})")
    if zlib.crc32(body) != crc:
        raise CheckpointError("checkpoint checksum mismatch (file corrupted)")
    off = len(MAGIC) + 8
    try:
        metadata = json.loads(body[off:off + meta_len].decode())
        off += meta_len
        (count,) = struct.unpack_from("<I", body, off)
        off += 4
        arrays = {}
        for _ in range(count):
            name_len, ndim = struct.unpack_from("<HB", body, off)
            off += 3
            name = body[off:off + name_len].decode()
            off += name_len
            shape = struct.unpack_from(f"<{ndim}Q", body, off)
            off += 8 * ndim
            size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
            arr = np.frombuffer(body, dtype="<f8", count=size, offset=off).reshape(shape)
            arrays[name] = arr.astype(np.float64, copy=True)
            off += 8 * size
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"truncated or malformed checkpoint: {exc}") from exc
    if off != len(body):
        raise CheckpointError("trailing bytes after last array")
    return arrays, metadata


def save(path: str | os.PathLike, arrays: dict, metadata: dict | None = None) -> None:
    blob = encode(arrays, metadata)
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint {path}: {exc}") from exc


def load(path: str | os.PathLike) -> tuple[dict, dict]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return decode(blob)
