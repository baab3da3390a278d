"""Shared binary envelope for on-disk artifacts.

Layout (little-endian): 32-byte header = magic (8 bytes), version u32,
one u32 field, one u64 field, 8 reserved zero bytes; then the raw payload;
then a u64 FNV-1a checksum of the payload. Bit-exact across machines.
"""

from __future__ import annotations

import struct
from pathlib import Path

from .errors import (
    ChecksumError,
    FormatError,
    MagicMismatchError,
    TruncatedFileError,
    VersionMismatchError,
)

HEADER_FMT = "<8sIIQ8s"
HEADER_SIZE = struct.calcsize(HEADER_FMT)
TRAILER_SIZE = 8

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data, h: int = _FNV_OFFSET) -> int:
    """64-bit FNV-1a over a bytes-like object; chainable via the h argument."""
    prime = _FNV_PRIME
    for b in memoryview(data).cast("B"):
        h = ((h ^ b) * prime) & _U64
    return h


def pack_header(magic: bytes, version: int, field32: int, field64: int) -> bytes:
    return struct.pack(HEADER_FMT, magic, version, field32, field64, b"\x00" * 8)


def read_envelope(path, magic: bytes, version: int, payload_size):
    """Read and verify an envelope file; returns (field32, field64, payload bytes).

    payload_size maps (field32, field64) -> expected payload byte count.
    """
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE:
        raise TruncatedFileError(f"{path}: file shorter than header")
    got_magic, got_version, field32, field64, _ = struct.unpack_from(HEADER_FMT, raw)
    if got_magic != magic:
        raise MagicMismatchError(f"{path}: magic {got_magic!r} != {magic!r}")
    if got_version != version:
        raise VersionMismatchError(f"{path}: version {got_version} != {version}")
    expected = payload_size(field32, field64)
    if len(raw) < HEADER_SIZE + expected + TRAILER_SIZE:
        raise TruncatedFileError(
            f"{path}: expected {HEADER_SIZE + expected + TRAILER_SIZE} bytes, got {len(raw)}"
        )
    if len(raw) > HEADER_SIZE + expected + TRAILER_SIZE:
        raise FormatError(f"{path}: trailing bytes after checksum")
    payload = raw[HEADER_SIZE:HEADER_SIZE + expected]
    (stored,) = struct.unpack_from("<Q", raw, HEADER_SIZE + expected)
    actual = fnv1a64(payload)
    if stored != actual:
        raise ChecksumError(f"{path}: checksum {actual:#018x} != stored {stored:#018x}")
    return field32, field64, payload


def write_envelope(path, magic: bytes, version: int, field32: int, field64: int, payload: bytes):
    with open(path, "wb") as f:
        f.write(pack_header(magic, version, field32, field64))
        f.write(payload)
        f.write(struct.pack("<Q", fnv1a64(payload)))
