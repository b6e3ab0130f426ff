"""Export job: cleaned tickets in, EMBV1 embeddings out.

The encoder is injectable; the default resolves a pretrained multilingual
sentence model by name via sentence-transformers (an optional dependency).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ticket_embed_exporter.compose import compose_text
from ticket_embed_exporter.embv1 import write_embv1

DEFAULT_MODEL = "sentence-transformers/paraphrase-multilingual-mpnet-base-v2"


class ExportError(RuntimeError):
    pass


@dataclass
class ExportJob:
    input_path: str
    output_path: str
    model_name: str = DEFAULT_MODEL
    batch_size: int = 32
    device: str | None = None


class SentenceEncoder:
    """sentence-transformers backend."""

    def __init__(self, model_name: str, device: str | None = None):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ExportError(
                "sentence-transformers is not installed; "
                "pip install 'ticket-embed-exporter[model]'"
            ) from exc
        try:
            self._model = SentenceTransformer(model_name, device=device)
        except Exception as exc:
            raise ExportError(f"cannot load model {model_name!r}: {exc}") from exc
        self.dims = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str], batch_size: int) -> np.ndarray:
        out = self._model.encode(
            texts,
            batch_size=batch_size,
            convert_to_numpy=True,
            show_progress_bar=False,
        )
        return np.asarray(out, dtype=np.float32)


def read_cleaned_tickets(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"bad JSON on line {line_no}: {exc}")
            if not isinstance(raw, dict) or not raw.get("id"):
                raise ExportError(f"line {line_no} is not a ticket record")
            records.append(raw)
    return records


def export(job: ExportJob, encoder=None) -> dict:
    """Run the job; returns a summary dict (rows, dims, output path).

    Row i of the output is the embedding of the composed text of ticket i;
    the manifest preserves input order.
    """
    records = read_cleaned_tickets(job.input_path)
    if not records:
        raise ExportError("empty_input")
    if encoder is None:
        encoder = SentenceEncoder(job.model_name, device=job.device)
    texts = [compose_text(rec) for rec in records]
    ids = [rec["id"] for rec in records]
    chunks = []
    try:
        for start in range(0, len(texts), job.batch_size):
            chunks.append(encoder.encode(texts[start : start + job.batch_size], job.batch_size))
    except MemoryError as exc:
        raise ExportError(
            f"out of memory at batch size {job.batch_size}; retry with a smaller --batch-size"
        ) from exc
    matrix = np.vstack(chunks).astype(np.float32)
    if matrix.shape[0] != len(ids):
        raise ExportError(
            f"encoder returned {matrix.shape[0]} rows for {len(ids)} tickets"
        )
    write_embv1(matrix, ids, job.output_path)
    return {"rows": int(matrix.shape[0]), "dims": int(matrix.shape[1]), "output": str(job.output_path)}
