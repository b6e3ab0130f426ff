import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from priopipe import dataset as ds
from priopipe import synth
from priopipe.embedding import pseudo_embed_matrix
from priopipe.pipeline import SweepInputs


@pytest.fixture(scope="session")
def blobs3():
    """Three well-separated 10-D Gaussian blobs, 100 points each."""
    rng = np.random.default_rng(11)
    centers = rng.normal(scale=8.0, size=(3, 10))
    X = np.vstack([rng.normal(c, 0.6, size=(100, 10)) for c in centers])
    y = np.repeat(np.arange(3), 100)
    return X, y


@pytest.fixture(scope="session")
def synth_clean():
    """Cleaned synthetic corpus (2000 tickets) shared across tests."""
    raw = synth.synth_tickets(2000, seed=7)
    records = [_record_from_raw(r) for r in raw]
    kept, rejects = ds.clean(records)
    assert len(kept) == 2000 and not rejects
    return kept


def _record_from_raw(raw: dict) -> ds.TicketRecord:
    from datetime import datetime, timezone

    def ts(v):
        return datetime.fromisoformat(v).astimezone(timezone.utc)

    return ds.TicketRecord(
        id=raw["id"],
        title=raw["title"],
        description=raw["description"],
        category=raw["category"],
        department=raw["department"],
        asset_name=raw["asset_name"],
        asset_description=raw["asset_description"],
        submit_date=ts(raw["submit_date"]),
        max_resolution_date=ts(raw["max_resolution_date"]),
        urgency=raw["urgency"],
        impact=raw["impact"],
    )


@pytest.fixture(scope="session")
def synth_inputs(synth_clean):
    """Pseudo-embedded sweep inputs for the 2000-ticket fixture (64 dims)."""
    texts = [ds.compose_text(r) for r in synth_clean]
    matrix = pseudo_embed_matrix(texts, [r.id for r in synth_clean], 64, seed=13)
    return SweepInputs.from_records(synth_clean, matrix, (5, 4), seed=13)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion test."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            if "test_acceptance" in getattr(report, "nodeid", ""):
                name = report.nodeid.split("::", 1)[-1]
                lines.append((name, "PASS" if outcome == "passed" else "FAIL"))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, status in lines:
            terminalreporter.write_line(f"{status}  {name}")
