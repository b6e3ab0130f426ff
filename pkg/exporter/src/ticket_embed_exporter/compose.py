"""Ticket text composition.

This deliberately duplicates the consumer's composition rule instead of
importing it: the contract across the package boundary is the exact bytes,
locked by the shared golden fixture (fixtures/compose_golden/). Any change
here must reproduce that fixture.
"""

from __future__ import annotations

COMPOSE_TEMPLATES = (
    ("title", "ticket title: "),
    ("description", "ticket description: "),
    ("category", "ticket category: "),
    ("department", "ticket department: "),
    ("asset_name", "ticket asset name: "),
    ("asset_description", "ticket asset description: "),
)


def compose_text(record: dict) -> str:
    """Fixed-order, fixed-template concatenation of the ticket text fields,
    one segment per line; empty fields still emit their segment."""
    return "\n".join(
        prefix + (record.get(field) or "") for field, prefix in COMPOSE_TEMPLATES
    )
