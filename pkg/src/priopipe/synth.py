"""Synthetic ITSM-style ticket corpus generator.

Produces raw JSONL-able ticket dicts whose text carries label-correlated
vocabulary, so embedding pipelines have real (if easy) signal to find. Used
by the test suite as a desk-scale stand-in for production data and handy
for demos: ``python -m priopipe.synth --out tickets.jsonl --n 2000``.
"""

from __future__ import annotations

import argparse
import json
from datetime import datetime, timedelta, timezone

import numpy as np

URGENCY_WORDS = (
    ("whenever", "backlog", "cosmetic", "lowkey"),
    ("routine", "minor", "scheduled", "nonurgent"),
    ("soon", "degraded", "slow", "intermittent"),
    ("urgent", "blocking", "failing", "asap"),
    ("outage", "down", "critical", "emergency"),
)
IMPACT_WORDS = (
    ("personal", "single", "myself", "workstation"),
    ("team", "several", "colleagues", "floor"),
    ("department", "branch", "dozens", "building"),
    ("sitewide", "everyone", "global", "company"),
)
FILLER = (
    "printer", "vpn", "email", "login", "password", "server", "disk",
    "network", "monitor", "license", "update", "crash", "error", "account",
    "access", "backup", "database", "firewall", "laptop", "portal",
)
CATEGORIES = ("hardware", "software", "network", "access", "other")
DEPARTMENTS = ("finance", "sales", "engineering", "hr", "support", "legal")

# skewed joint label distribution: one dominant class per target, rare tails
URGENCY_PROBS = (0.05, 0.20, 0.30, 0.05, 0.40)
IMPACT_PROBS = (0.04, 0.03, 0.84, 0.09)


def synth_tickets(
    n: int = 2000,
    seed: int = 0,
    cardinalities: tuple[int, int] = (5, 4),
    html_fraction: float = 0.3,
    noise_rows: int = 0,
) -> list[dict]:
    """Generate n raw ticket dicts (plus optional reject-exercising rows).

    noise_rows appends duplicates / test-titled / broken rows so the
    cleaning stage has something to reject.
    """
    max_u, max_i = cardinalities
    rng = np.random.default_rng(seed)
    u_probs = np.asarray(URGENCY_PROBS[:max_u], dtype=np.float64)
    u_probs /= u_probs.sum()
    i_probs = np.asarray(IMPACT_PROBS[:max_i], dtype=np.float64)
    i_probs /= i_probs.sum()
    base = datetime(2024, 1, 1, tzinfo=timezone.utc)

    def words(pool, count):
        return [pool[rng.integers(0, len(pool))] for _ in range(count)]

    out = []
    for idx in range(n):
        u = int(rng.choice(max_u, p=u_probs))
        i = int(rng.choice(max_i, p=i_probs))
        u_pool = URGENCY_WORDS[u % len(URGENCY_WORDS)]
        i_pool = IMPACT_WORDS[i % len(IMPACT_WORDS)]
        title = " ".join(
            words(FILLER, 1) + words(u_pool, 2) + words(i_pool, 1)
        )
        body_tokens = (
            words(u_pool, 4) + words(i_pool, 3) + words(FILLER, rng.integers(4, 9))
        )
        # issue-code token carrying joint label signal; noisy so pipelines
        # stay imperfect
        if rng.random() < 0.85:
            body_tokens += [f"err{u}{i}0"] * 2
        # dominant nuisance structure (reporting site), uncorrelated with
        # labels: unsupervised clustering has stronger geometry to chase
        # than the label signal
        body_tokens += [f"site{int(rng.integers(0, 8))}"] * 3
        rng.shuffle(body_tokens)
        description = " ".join(body_tokens)
        if rng.random() < html_fraction:
            description = f"<p>{description}</p> <b>ref&nbsp;#{idx}</b>"
        submit = base + timedelta(hours=float(rng.uniform(0, 24 * 360)))
        # higher urgency -> shorter allowed resolution window
        window = float(rng.uniform(4, 24)) * (max_u - u) + 1.0
        out.append(
            {
                "id": f"T{idx:05d}",
                "title": title,
                "description": description,
                "category": CATEGORIES[(i * 2 + int(rng.integers(0, 2))) % len(CATEGORIES)],
                "department": DEPARTMENTS[int(rng.integers(0, len(DEPARTMENTS)))],
                "asset_name": f"asset-{int(rng.integers(0, 50)):02d}",
                "asset_description": " ".join(words(FILLER, 3)),
                "submit_date": submit.isoformat(),
                "max_resolution_date": (submit + timedelta(hours=window)).isoformat(),
                "urgency": u,
                "impact": i,
            }
        )
    for j in range(noise_rows):
        kind = j % 3
        if kind == 0 and out:
            out.append(dict(out[int(rng.integers(0, n))]))  # exact duplicate
        elif kind == 1:
            noisy = dict(out[int(rng.integers(0, n))])
            noisy = {**noisy, "id": f"N{j:04d}", "title": "test ticket please ignore"}
            out.append(noisy)
        else:
            noisy = {**out[int(rng.integers(0, n))], "id": f"N{j:04d}", "description": ""}
            out.append(noisy)
    return out


def write_jsonl(records: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Generate a synthetic ticket corpus")
    parser.add_argument("--out", required=True, help="output JSONL path")
    parser.add_argument("--n", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--noise-rows", type=int, default=0)
    args = parser.parse_args(argv)
    write_jsonl(synth_tickets(args.n, args.seed, noise_rows=args.noise_rows), args.out)
    print(f"wrote {args.n + args.noise_rows} records to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
