"""On-disk k-mer database.

Layout, all integers little-endian::

    magic        8 bytes   b"HDCAMDB1"
    version      u16       1
    k            u16       k-mer length in bases
    encoding     u8        1 = OneHot4, 2 = Gray3
    flags        u8        bit 0: deduplicated
    word_bits    u32       k * bits_per_base
    row_count    u64
    acc_len      u16       followed by acc_len bytes of UTF-8 accession
    rows         row_count * ceil(word_bits / 8) bytes, LSB-first packing
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .bitcam import CamArray
from .genomics import GRAY3, ONE_HOT4, KmerDb

MAGIC = b"HDCAMDB1"
VERSION = 1
_HEADER = struct.Struct("<8sHHBBIQH")
_ENCODING_IDS = {ONE_HOT4.kind: 1, GRAY3.kind: 2}
_ENCODINGS_BY_ID = {1: ONE_HOT4, 2: GRAY3}
FLAG_DEDUP = 0x01


class DbFormatError(ValueError):
    pass


class BadMagicError(DbFormatError):
    pass


class VersionError(DbFormatError):
    pass


class TruncatedError(DbFormatError):
    pass


def dumps(db: KmerDb) -> bytes:
    acc = db.source_accession.encode("utf-8")
    if len(acc) > 0xFFFF:
        raise ValueError("accession longer than 65535 bytes")
    if db.k > 0xFFFF:
        raise ValueError("k does not fit in 16 bits")
    header = _HEADER.pack(MAGIC, VERSION, db.k, _ENCODING_IDS[db.encoding.kind],
                          FLAG_DEDUP if db.deduplicated else 0, db.width, db.row_count, len(acc))
    return header + acc + db.array.packed.tobytes()


def loads(data: bytes) -> KmerDb:
    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise BadMagicError("not a k-mer database: bad magic (expected HDCAMDB1)")
    if len(data) < _HEADER.size:
        raise TruncatedError(f"truncated header: {len(data)} of {_HEADER.size} bytes")
    _, version, k, enc_id, flags, word_bits, row_count, acc_len = _HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionError(f"unsupported database version {version} (this build reads {VERSION})")
    if enc_id not in _ENCODINGS_BY_ID:
        raise DbFormatError(f"unknown encoding id {enc_id}")
    encoding = _ENCODINGS_BY_ID[enc_id]
    if word_bits != k * encoding.bits_per_base:
        raise DbFormatError(f"word_bits {word_bits} != k {k} x {encoding.bits_per_base} bits per base")
    row_bytes = (word_bits + 7) // 8
    expected = _HEADER.size + acc_len + row_count * row_bytes
    if len(data) < expected:
        raise TruncatedError(f"truncated file: {len(data)} bytes, header implies {expected}")
    if len(data) > expected:
        raise DbFormatError(f"{len(data) - expected} trailing bytes after the last row")
    off = _HEADER.size
    try:
        accession = data[off:off + acc_len].decode("utf-8")
    except UnicodeDecodeError:
        raise DbFormatError("accession is not valid UTF-8") from None
    off += acc_len
    rows = np.frombuffer(data, dtype=np.uint8, count=row_count * row_bytes, offset=off)
    array = CamArray(word_bits, rows.reshape(row_count, row_bytes).copy())
    return KmerDb(k, encoding, array, accession, bool(flags & FLAG_DEDUP))


def write_db(db: KmerDb, path: str | Path) -> None:
    atomic_write(Path(path), dumps(db))


def read_db(path: str | Path) -> KmerDb:
    return loads(Path(path).read_bytes())


def atomic_write(path: Path, payload: bytes) -> None:
    """Write to a sibling temp file, then rename over the target."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
