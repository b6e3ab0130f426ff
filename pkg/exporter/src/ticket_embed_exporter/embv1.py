"""EMBV1 writer/inspector.

Wire format (little-endian): magic ``EMBV1\\0`` (6 bytes), u32 rows, u32
dims, rows*dims IEEE-754 binary32 row-major, then a UTF-8 JSON array of
row ids. Independent implementation of the consumer's format; the bytes
are the contract.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"EMBV1\x00"
_HEADER = struct.Struct("<II")


def write_embv1(data: np.ndarray, ids: list[str], path: str | Path) -> None:
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {data.shape}")
    if len(ids) != data.shape[0]:
        raise ValueError(f"{len(ids)} ids for {data.shape[0]} rows")
    if not np.isfinite(data).all():
        raise ValueError("refusing to write non-finite values")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(data.shape[0], data.shape[1]))
        fh.write(data.tobytes(order="C"))
        fh.write(json.dumps(list(ids), ensure_ascii=False).encode("utf-8"))


def inspect_embv1(path: str | Path) -> dict:
    """Structural check; returns a report dict with status 'OK' or the
    first problem found (bad_magic, truncated, bad_manifest,
    manifest_mismatch, non_finite_at(row,col))."""
    blob = Path(path).read_bytes()
    if blob[: len(MAGIC)] != MAGIC:
        return {"status": "bad_magic"}
    header_end = len(MAGIC) + _HEADER.size
    if len(blob) < header_end:
        return {"status": "truncated"}
    rows, dims = _HEADER.unpack(blob[len(MAGIC) : header_end])
    data_end = header_end + rows * dims * 4
    if len(blob) < data_end:
        return {"status": "truncated"}
    data = np.frombuffer(blob[header_end:data_end], dtype="<f4").reshape(rows, dims)
    try:
        ids = json.loads(blob[data_end:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return {"status": "bad_manifest"}
    if not isinstance(ids, list) or len(ids) != rows:
        return {"status": "manifest_mismatch"}
    finite = np.isfinite(data)
    if not finite.all():
        row, col = np.argwhere(~finite)[0]
        return {"status": f"non_finite_at({row},{col})"}
    return {"status": "OK", "rows": int(rows), "dims": int(dims)}
