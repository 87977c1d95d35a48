"""Checksummed binary container shared by trace files and checkpoints.

Layout, in order::

    <MAGIC> <VERSION> <JSON header>\\n      one UTF-8 line
    array payloads                          little-endian, C order, header order
    SHA-256 digest (32 raw bytes)           over the header line and payloads

The JSON header carries an ``"arrays"`` list of ``{"name", "shape",
"dtype"}`` records (dtype is ``"<f4"`` or ``"<f8"``) plus any
format-specific metadata.  Keys are sorted so identical content always
produces identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .errors import (
    ChecksumError,
    DataError,
    MalformedHeaderError,
    TruncatedPayloadError,
)

DIGEST_SIZE = 32
_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


def _dtype_code(arr: np.ndarray) -> str:
    if arr.dtype == np.float32:
        return "<f4"
    if arr.dtype == np.float64:
        return "<f8"
    raise DataError(f"only float32/float64 arrays can be stored, got {arr.dtype}")


def encode(magic: str, version: int, meta: dict, arrays: dict[str, np.ndarray]) -> bytes:
    records = []
    chunks = []
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        code = _dtype_code(arr)
        records.append({"name": name, "shape": list(arr.shape), "dtype": code})
        chunks.append(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())
    header = dict(meta)
    header["arrays"] = records
    line = f"{magic} {version} {json.dumps(header, sort_keys=True, separators=(',', ':'))}\n"
    body = line.encode("utf-8") + b"".join(chunks)
    return body + hashlib.sha256(body).digest()


def decode(blob: bytes, magic: str, version: int) -> tuple[dict, dict[str, np.ndarray]]:
    newline = blob.find(b"\n")
    if newline < 0:
        raise MalformedHeaderError("no header line found")
    try:
        line = blob[:newline].decode("utf-8")
        got_magic, got_version, payload = line.split(" ", 2)
        header = json.loads(payload)
        records = header["arrays"]
    except (UnicodeDecodeError, ValueError, KeyError) as exc:
        raise MalformedHeaderError(f"cannot parse header: {exc}") from None
    if got_magic != magic:
        raise MalformedHeaderError(f"bad magic {got_magic!r}, expected {magic!r}")
    if got_version != str(version):
        raise MalformedHeaderError(f"unsupported version {got_version}, expected {version}")

    sizes = []
    for rec in records:
        try:
            dtype = _DTYPES[rec["dtype"]]
            count = int(np.prod(rec["shape"], dtype=np.int64))
        except (KeyError, TypeError, ValueError):
            raise MalformedHeaderError(f"bad array record {rec!r}") from None
        sizes.append(count * dtype.itemsize)
    start = newline + 1
    expected = start + sum(sizes) + DIGEST_SIZE
    if len(blob) < expected:
        raise TruncatedPayloadError(f"file holds {len(blob)} bytes, header implies {expected}")
    if len(blob) > expected:
        raise MalformedHeaderError(f"file holds {len(blob) - expected} trailing bytes")
    body = blob[: expected - DIGEST_SIZE]
    if hashlib.sha256(body).digest() != blob[expected - DIGEST_SIZE :]:
        raise ChecksumError("SHA-256 digest mismatch")

    arrays = {}
    offset = start
    for rec, size in zip(records, sizes):
        dtype = _DTYPES[rec["dtype"]]
        arr = np.frombuffer(blob, dtype=dtype, count=size // dtype.itemsize, offset=offset)
        arrays[rec["name"]] = arr.reshape(rec["shape"]).astype(dtype.newbyteorder("="))
        offset += size
    return header, arrays


def write(path, magic: str, version: int, meta: dict, arrays: dict[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode(magic, version, meta, arrays)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    return path


def read(path, magic: str, version: int) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    return decode(path.read_bytes(), magic, version)
