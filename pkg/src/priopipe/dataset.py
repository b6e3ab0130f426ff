"""Ticket ingestion, cleaning, label arithmetic and dataset splitting.

Tickets travel as one JSON object per line (UTF-8). All operations are pure
functions over immutable records; rejected rows are reported with a reason,
never silently dropped.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from html.parser import HTMLParser
from pathlib import Path
from typing import Iterable

import numpy as np

__all__ = [
    "TicketRecord",
    "Reject",
    "ParseResult",
    "CleanConfig",
    "DatasetSplit",
    "PRIORITY_GRID",
    "PriorityMatrix",
    "parse_tickets",
    "clean",
    "compose_text",
    "time_feature",
    "combined_label",
    "decompose_combined",
    "priority",
    "default_level_collapse",
    "stratified_split",
    "write_tickets",
    "write_rejects",
]

TEXT_FIELDS = (
    "title",
    "description",
    "category",
    "department",
    "asset_name",
    "asset_description",
)
DATE_FIELDS = ("submit_date", "max_resolution_date")
LABEL_FIELDS = ("urgency", "impact")
REQUIRED_FIELDS = ("id",) + TEXT_FIELDS + DATE_FIELDS + LABEL_FIELDS

# Segment templates for compose_text, in the canonical field order. The
# exporter component reproduces these bytes; changes must update the shared
# golden fixture.
COMPOSE_TEMPLATES = (
    ("title", "ticket title: "),
    ("description", "ticket description: "),
    ("category", "ticket category: "),
    ("department", "ticket department: "),
    ("asset_name", "ticket asset name: "),
    ("asset_description", "ticket asset description: "),
)


@dataclass(frozen=True)
class TicketRecord:
    id: str
    title: str | None
    description: str | None
    category: str | None
    department: str | None
    asset_name: str | None
    asset_description: str | None
    submit_date: datetime | None
    max_resolution_date: datetime | None
    urgency: int | None
    impact: int | None

    def as_dict(self) -> dict:
        d = {"id": self.id}
        for f in TEXT_FIELDS:
            d[f] = getattr(self, f)
        for f in DATE_FIELDS:
            ts = getattr(self, f)
            d[f] = ts.isoformat() if ts is not None else None
        for f in LABEL_FIELDS:
            d[f] = getattr(self, f)
        return d


@dataclass(frozen=True)
class Reject:
    reason: str
    line_no: int | None = None
    record_id: str | None = None
    raw: dict | None = None

    def as_dict(self) -> dict:
        d = dict(self.raw) if self.raw else {}
        d["reason"] = self.reason
        if self.record_id is not None:
            d.setdefault("id", self.record_id)
        return d


@dataclass(frozen=True)
class ParseResult:
    records: list[TicketRecord]
    rejects: list[Reject]


def _parse_timestamp(value: str) -> datetime:
    """ISO-8601 with zone, stored as UTC."""
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        raise ValueError("timestamp missing zone")
    return ts.astimezone(timezone.utc)


def parse_tickets(path: str | Path) -> ParseResult:
    """Read a one-JSON-object-per-line ticket file.

    Records keep their file order. Lines that fail to parse, miss a required
    key, or carry a wrong-typed value are routed to rejects with a reason
    (``bad_json``, ``missing_field:<name>``, ``bad_field:<name>``). Explicit
    nulls pass here and are dealt with by clean().
    """
    records: list[TicketRecord] = []
    rejects: list[Reject] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError:
                rejects.append(Reject("bad_json", line_no=line_no))
                continue
            if not isinstance(raw, dict):
                rejects.append(Reject("bad_json", line_no=line_no))
                continue
            reason = None
            for field in REQUIRED_FIELDS:
                if field not in raw:
                    reason = f"missing_field:{field}"
                    break
            if reason is None:
                reason = _type_check(raw)
            if reason is not None:
                rejects.append(Reject(reason, line_no=line_no, raw=raw))
                continue
            records.append(
                TicketRecord(
                    id=raw["id"],
                    title=raw["title"],
                    description=raw["description"],
                    category=raw["category"],
                    department=raw["department"],
                    asset_name=raw["asset_name"],
                    asset_description=raw["asset_description"],
                    submit_date=_parse_timestamp(raw["submit_date"])
                    if raw["submit_date"] is not None
                    else None,
                    max_resolution_date=_parse_timestamp(raw["max_resolution_date"])
                    if raw["max_resolution_date"] is not None
                    else None,
                    urgency=raw["urgency"],
                    impact=raw["impact"],
                )
            )
    return ParseResult(records, rejects)


def _type_check(raw: dict) -> str | None:
    if not isinstance(raw["id"], str) or not raw["id"]:
        return "bad_field:id"
    for field in TEXT_FIELDS:
        if raw[field] is not None and not isinstance(raw[field], str):
            return f"bad_field:{field}"
    for field in DATE_FIELDS:
        value = raw[field]
        if value is None:
            continue
        if not isinstance(value, str):
            return f"bad_field:{field}"
        try:
            _parse_timestamp(value)
        except ValueError:
            return f"bad_field:{field}"
    for field in LABEL_FIELDS:
        value = raw[field]
        if value is None:
            continue
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            return f"bad_field:{field}"
    return None


class _HTMLStripper(HTMLParser):
    """Collects visible text; tags and entities are resolved away."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.chunks: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in ("script", "style"):
            self._skip_depth += 1

    def handle_endtag(self, tag):
        if tag in ("script", "style") and self._skip_depth:
            self._skip_depth -= 1

    def handle_data(self, data):
        if not self._skip_depth:
            self.chunks.append(data)


_KEEP_PUNCT = set(".,:;!?-/")


def clean_text(text: str) -> str:
    """HTML-strip, drop special characters, lowercase, normalize whitespace.

    Keeps unicode letters/digits and basic punctuation (.,:;!?-/); every
    other character becomes a space so surrounding tokens stay separate.
    Idempotent: cleaned output contains no markup to strip.
    """
    stripper = _HTMLStripper()
    stripper.feed(text)
    stripper.close()
    visible = " ".join(stripper.chunks)
    kept = [
        ch if (ch.isalnum() or ch in _KEEP_PUNCT) else " " for ch in visible.lower()
    ]
    return re.sub(r"\s+", " ", "".join(kept)).strip()


@dataclass(frozen=True)
class CleanConfig:
    cardinalities: tuple[int, int] = (5, 4)  # (U, I)
    title_patterns: tuple[str, ...] = ("test", "ignore")


def clean(
    records: Iterable[TicketRecord], config: CleanConfig = CleanConfig()
) -> tuple[list[TicketRecord], list[Reject]]:
    """Deduplicate, normalize text, validate fields; return (kept, rejects).

    Checks in order: exact duplicate, repeated id, missing/empty required
    field after text cleaning, label range against the declared
    cardinalities, date ordering, then noise-title patterns (case-insensitive
    substrings). Drops are rejects with a reason, never errors. Idempotent
    over its own output.
    """
    kept: list[TicketRecord] = []
    rejects: list[Reject] = []
    seen_exact: set[tuple] = set()
    seen_ids: set[str] = set()
    max_u, max_i = config.cardinalities
    patterns = tuple(p.lower() for p in config.title_patterns)

    for rec in records:
        key = (
            rec.id,
            rec.title,
            rec.description,
            rec.category,
            rec.department,
            rec.asset_name,
            rec.asset_description,
            rec.submit_date,
            rec.max_resolution_date,
            rec.urgency,
            rec.impact,
        )
        if key in seen_exact:
            rejects.append(Reject("duplicate", record_id=rec.id, raw=rec.as_dict()))
            continue
        seen_exact.add(key)
        if rec.id in seen_ids:
            rejects.append(Reject("duplicate_id", record_id=rec.id, raw=rec.as_dict()))
            continue
        seen_ids.add(rec.id)

        cleaned = replace(
            rec, **{f: clean_text(getattr(rec, f) or "") for f in TEXT_FIELDS}
        )
        reason = None
        for field in TEXT_FIELDS:
            if not getattr(cleaned, field):
                reason = f"missing_field:{field}"
                break
        if reason is None:
            for field in DATE_FIELDS:
                if getattr(cleaned, field) is None:
                    reason = f"missing_field:{field}"
                    break
        if reason is None:
            for field in LABEL_FIELDS:
                if getattr(cleaned, field) is None:
                    reason = f"missing_field:{field}"
                    break
        if reason is None:
            if not 0 <= cleaned.urgency < max_u:
                reason = "label_out_of_range:urgency"
            elif not 0 <= cleaned.impact < max_i:
                reason = "label_out_of_range:impact"
        if reason is None and cleaned.max_resolution_date < cleaned.submit_date:
            reason = "negative_interval"
        if reason is None:
            for pat in patterns:
                if pat in cleaned.title:
                    reason = f"test_pattern:{pat}"
                    break
        if reason is not None:
            rejects.append(Reject(reason, record_id=rec.id, raw=rec.as_dict()))
            continue
        kept.append(cleaned)
    return kept, rejects


def compose_text(record: TicketRecord) -> str:
    """Concatenate the text fields with fixed prefixes, one segment per line.

    The segment order and templates are frozen; empty fields still emit
    their segment so the composed shape is stable.
    """
    return "\n".join(
        prefix + (getattr(record, field) or "") for field, prefix in COMPOSE_TEMPLATES
    )


def time_feature(record: TicketRecord) -> float:
    """Interval between max resolution date and submit date, in hours."""
    if record.submit_date is None or record.max_resolution_date is None:
        raise ValueError(f"record {record.id} has missing dates")
    delta = (record.max_resolution_date - record.submit_date).total_seconds()
    if delta < 0:
        raise ValueError(f"record {record.id} has negative resolution interval")
    return delta / 3600.0


def combined_label(urgency: int, impact: int, cardinalities: tuple[int, int]) -> int:
    """Joint class index I*urgency + impact, in [0, U*I)."""
    max_u, max_i = cardinalities
    if not 0 <= urgency < max_u:
        raise ValueError(f"urgency {urgency} outside [0, {max_u})")
    if not 0 <= impact < max_i:
        raise ValueError(f"impact {impact} outside [0, {max_i})")
    return max_i * urgency + impact


def decompose_combined(value: int, cardinalities: tuple[int, int]) -> tuple[int, int]:
    """Exact inverse of combined_label."""
    max_u, max_i = cardinalities
    if not 0 <= value < max_u * max_i:
        raise ValueError(f"combined label {value} outside [0, {max_u * max_i})")
    return value // max_i, value % max_i


# 3x3 grid: PRIORITY_GRID[urgency_level][impact_level], levels indexed
# High=0, Medium=1, Low=2; values are 1=Critical .. 4=Low.
PRIORITY_GRID = (
    (1, 2, 3),
    (2, 3, 4),
    (3, 4, 4),
)
LEVELS = ("High", "Medium", "Low")
_LEVEL_INDEX = {name: i for i, name in enumerate(LEVELS)}


def priority(urgency_level: str, impact_level: str) -> int:
    """Look up the 1-4 priority for (urgency level, impact level)."""
    try:
        return PRIORITY_GRID[_LEVEL_INDEX[urgency_level]][_LEVEL_INDEX[impact_level]]
    except KeyError as exc:
        raise ValueError(f"unknown level {exc.args[0]!r}; expected one of {LEVELS}")


def default_level_collapse(cardinality: int) -> dict[int, str]:
    """Collapse a 0..cardinality-1 class scale onto the three grid levels.

    The lowest/middle/highest thirds of the index range map to Low/Medium/
    High: class index grows with severity in the default reading.
    """
    if cardinality < 1:
        raise ValueError("cardinality must be >= 1")
    collapse = {}
    for c in range(cardinality):
        third = (3 * c) // cardinality  # 0=lowest third .. 2=highest
        collapse[c] = ("Low", "Medium", "High")[third]
    return collapse


@dataclass(frozen=True)
class PriorityMatrix:
    """The fixed 3x3 priority grid plus collapse maps from dataset class
    indices onto its three levels. The grid itself is not configurable; the
    collapse maps are (they must stay total over the class ranges)."""

    urgency_collapse: dict[int, str]
    impact_collapse: dict[int, str]

    @classmethod
    def for_cardinalities(cls, cardinalities: tuple[int, int]) -> "PriorityMatrix":
        max_u, max_i = cardinalities
        return cls(default_level_collapse(max_u), default_level_collapse(max_i))

    def priority_of(self, urgency: int, impact: int) -> int:
        try:
            u_level = self.urgency_collapse[urgency]
            i_level = self.impact_collapse[impact]
        except KeyError as exc:
            raise ValueError(f"class index {exc.args[0]} missing from collapse map")
        return priority(u_level, i_level)


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]
    seed: int

    def as_dict(self) -> dict:
        return {
            "train": list(self.train),
            "val": list(self.val),
            "test": list(self.test),
            "seed": self.seed,
        }


def stratified_split(
    records: list[TicketRecord],
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> DatasetSplit:
    """Split ids into train/val/test, stratified on urgency.

    Within each urgency class the per-split counts follow the ratios with
    largest-remainder rounding; rounding ties and leftovers favor train.
    Deterministic given the seed. A class with fewer than 3 members is an
    error.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    by_class: dict[int, list[str]] = {}
    for rec in records:
        if rec.urgency is None:
            raise ValueError(f"record {rec.id} has no urgency label")
        by_class.setdefault(rec.urgency, []).append(rec.id)
    for cls, ids in sorted(by_class.items()):
        if len(ids) < 3:
            raise ValueError(f"urgency class {cls} has only {len(ids)} members (< 3)")

    rng = np.random.default_rng(seed)
    buckets: tuple[list[str], ...] = ([], [], [])
    for cls in sorted(by_class):
        ids = by_class[cls]
        order = rng.permutation(len(ids))
        shuffled = [ids[i] for i in order]
        counts = _largest_remainder(len(ids), ratios)
        start = 0
        for bucket, count in zip(buckets, counts):
            bucket.extend(shuffled[start : start + count])
            start += count
    train, val, test = buckets
    return DatasetSplit(tuple(train), tuple(val), tuple(test), seed)


def _largest_remainder(n: int, ratios: tuple[float, ...]) -> list[int]:
    exact = [n * r for r in ratios]
    counts = [int(x) for x in exact]
    remainders = [x - c for x, c in zip(exact, counts)]
    # Ties and leftovers resolve toward the earliest split (train first).
    order = sorted(range(len(ratios)), key=lambda i: (-remainders[i], i))
    for i in range(n - sum(counts)):
        counts[order[i % len(order)]] += 1
    return counts


def write_tickets(records: Iterable[TicketRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.as_dict(), ensure_ascii=False) + "\n")


def write_rejects(rejects: Iterable[Reject], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rej in rejects:
            fh.write(json.dumps(rej.as_dict(), ensure_ascii=False) + "\n")
