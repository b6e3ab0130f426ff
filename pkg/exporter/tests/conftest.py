import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

REPO_ROOT = Path(__file__).resolve().parents[2]
GOLDEN_DIR = REPO_ROOT / "fixtures" / "compose_golden"


class StubEncoder:
    """Deterministic offline encoder with the default model's width."""

    dims = 768

    def encode(self, texts, batch_size):
        out = np.zeros((len(texts), self.dims), dtype=np.float32)
        for i, text in enumerate(texts):
            digest = hashlib.blake2b(text.encode("utf-8"), digest_size=16).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            vec = rng.normal(size=self.dims)
            out[i] = (vec / np.linalg.norm(vec)).astype(np.float32)
        return out


@pytest.fixture()
def stub_encoder():
    return StubEncoder()


@pytest.fixture()
def golden_tickets():
    path = GOLDEN_DIR / "cleaned_input.jsonl"
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


@pytest.fixture()
def golden_composed():
    return json.loads((GOLDEN_DIR / "expected_composed.json").read_text())


@pytest.fixture()
def ticket_file(tmp_path, golden_tickets):
    path = tmp_path / "tickets.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for rec in golden_tickets:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return path
