"""Embedding matrices: EMBV1 file format, pseudo-embedder, scaling, cosine.

EMBV1 layout (little-endian): magic ``EMBV1\\0`` (6 bytes), u32 rows, u32
dims, rows*dims IEEE-754 binary32 values row-major, then a UTF-8 JSON array
of row ids. The manifest order is the row order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from hashlib import blake2b
from pathlib import Path

import numpy as np

__all__ = [
    "EmbeddingMatrix",
    "EmbeddingFormatError",
    "MinMaxScaler",
    "save_embeddings",
    "load_embeddings",
    "pseudo_embed",
    "pseudo_embed_matrix",
    "cosine",
    "class_centroids",
]

MAGIC = b"EMBV1\x00"
_HEADER = struct.Struct("<II")


class EmbeddingFormatError(ValueError):
    """Malformed EMBV1 file; carries the byte offset of the problem."""

    def __init__(self, reason: str, offset: int):
        super().__init__(f"{reason} at byte {offset}")
        self.reason = reason
        self.offset = offset


@dataclass(frozen=True)
class EmbeddingMatrix:
    data: np.ndarray  # (rows, dims) float32
    ids: tuple[str, ...]

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"expected 2-D data, got shape {arr.shape}")
        if arr.shape[1] < 1:
            raise ValueError("dims must be > 0")
        if len(self.ids) != arr.shape[0]:
            raise ValueError(
                f"manifest has {len(self.ids)} ids for {arr.shape[0]} rows"
            )
        if not np.isfinite(arr).all():
            raise ValueError("embedding matrix contains non-finite values")
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray) -> "EmbeddingMatrix":
        """Same manifest, new values (e.g. after dimensionality reduction)."""
        return EmbeddingMatrix(data, self.ids)

    def subset(self, ids: list[str]) -> "EmbeddingMatrix":
        index = {rid: i for i, rid in enumerate(self.ids)}
        try:
            rows = [index[rid] for rid in ids]
        except KeyError as exc:
            raise KeyError(f"id {exc.args[0]!r} not in manifest")
        return EmbeddingMatrix(self.data[rows], tuple(ids))


def save_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    payload = matrix.data.astype("<f4", copy=False).tobytes(order="C")
    manifest = json.dumps(list(matrix.ids), ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(matrix.rows, matrix.dims))
        fh.write(payload)
        fh.write(manifest)


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    blob = Path(path).read_bytes()
    if blob[: len(MAGIC)] != MAGIC:
        raise EmbeddingFormatError("bad_magic", 0)
    header_end = len(MAGIC) + _HEADER.size
    if len(blob) < header_end:
        raise EmbeddingFormatError("truncated", len(blob))
    rows, dims = _HEADER.unpack(blob[len(MAGIC) : header_end])
    data_end = header_end + rows * dims * 4
    if len(blob) < data_end:
        raise EmbeddingFormatError("truncated", len(blob))
    data = np.frombuffer(blob[header_end:data_end], dtype="<f4").reshape(rows, dims)
    try:
        ids = json.loads(blob[data_end:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise EmbeddingFormatError("bad_manifest", data_end)
    if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
        raise EmbeddingFormatError("bad_manifest", data_end)
    if len(ids) != rows:
        raise EmbeddingFormatError("manifest_mismatch", data_end)
    return EmbeddingMatrix(data.copy(), tuple(ids))


def _token_hash(token: str, seed: int) -> bytes:
    key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    return blake2b(token.encode("utf-8"), digest_size=16, key=key).digest()


def pseudo_embed(text: str, dims: int, seed: int) -> np.ndarray:
    """Deterministic offline stand-in for a sentence embedding model.

    Whitespace tokens are hashed into ``dims`` signed buckets (feature
    hashing) and the sum is normalized to unit Euclidean length. Stable
    across runs and platforms for fixed (text, dims, seed). Zero-token text
    maps to a seed-derived unit basis vector.
    """
    if dims < 8:
        raise ValueError(f"dims must be >= 8, got {dims}")
    vec = np.zeros(dims, dtype=np.float64)
    tokens = text.split()
    if not tokens:
        digest = _token_hash("", seed)
        vec[int.from_bytes(digest[:8], "little") % dims] = 1.0
        return vec.astype(np.float32)
    for token in tokens:
        digest = _token_hash(token, seed)
        bucket = int.from_bytes(digest[:8], "little") % dims
        sign = 1.0 if digest[8] & 1 else -1.0
        vec[bucket] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        # Opposite-signed collisions cancelled everything; fall back to the
        # zero-token convention so the output is still a unit vector.
        digest = _token_hash("", seed)
        vec[int.from_bytes(digest[:8], "little") % dims] = 1.0
        return vec.astype(np.float32)
    return (vec / norm).astype(np.float32)


def pseudo_embed_matrix(
    texts: list[str], ids: list[str], dims: int, seed: int
) -> EmbeddingMatrix:
    data = np.stack([pseudo_embed(t, dims, seed) for t in texts]) if texts else (
        np.zeros((0, dims), dtype=np.float32)
    )
    return EmbeddingMatrix(data, tuple(ids))


@dataclass
class MinMaxScaler:
    """Train-fitted [0,1] scaler; out-of-range inputs are clamped."""

    min: float = 0.0
    max: float = 0.0
    fitted: bool = field(default=False, repr=False)

    def fit(self, values) -> "MinMaxScaler":
        arr = np.asarray(values, dtype=np.float64)
        if arr.size == 0:
            raise ValueError("cannot fit scaler on empty values")
        if not np.isfinite(arr).all():
            raise ValueError("non-finite value in scaler fit")
        self.min = float(arr.min())
        self.max = float(arr.max())
        self.fitted = True
        return self

    def transform(self, x: float) -> float:
        if not self.fitted:
            raise RuntimeError("scaler used before fit")
        if self.max == self.min:
            return 0.0
        scaled = (x - self.min) / (self.max - self.min)
        return min(1.0, max(0.0, scaled))

    def transform_many(self, values) -> np.ndarray:
        arr = np.asarray(values, dtype=np.float64)
        if not self.fitted:
            raise RuntimeError("scaler used before fit")
        if self.max == self.min:
            return np.zeros_like(arr)
        return np.clip((arr - self.min) / (self.max - self.min), 0.0, 1.0)


def fit_minmax(values) -> MinMaxScaler:
    return MinMaxScaler().fit(values)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; 0.0 by convention when either operand is zero."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dim mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def class_centroids(data: np.ndarray, labels: np.ndarray) -> dict[int, np.ndarray]:
    """Arithmetic mean of member rows per class; every class needs a member."""
    arr = np.asarray(data, dtype=np.float64)
    labels = np.asarray(labels)
    if arr.shape[0] != labels.shape[0]:
        raise ValueError("labels length must match row count")
    return {
        int(cls): arr[labels == cls].mean(axis=0) for cls in np.unique(labels)
    }
