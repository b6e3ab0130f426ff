"""Command-line entry point.

Subcommands: preprocess, pseudo-embed, sweep, select-best, eval-confusion,
report. Data goes to stdout, diagnostics to stderr. Exit codes: 0 success,
1 unexpected error, 2 unreadable input, 3 empty dataset after cleaning,
4 embedding dims too small, 5 invalid configuration. PRIOPIPE_SEED provides
the default seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from priopipe import dataset as ds
from priopipe import metrics as mets
from priopipe import pipeline as pl
from priopipe.embedding import EmbeddingMatrix, load_embeddings, pseudo_embed_matrix, save_embeddings

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNREADABLE = 2
EXIT_EMPTY = 3
EXIT_DIMS = 4
EXIT_CONFIG = 5


def _default_seed() -> int:
    try:
        return int(os.environ.get("PRIOPIPE_SEED", "0"))
    except ValueError:
        return 0


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_preprocess(args) -> int:
    try:
        parsed = ds.parse_tickets(args.input)
    except OSError as exc:
        return _fail(EXIT_UNREADABLE, f"cannot read {args.input}: {exc}")
    config = ds.CleanConfig(
        cardinalities=tuple(args.cardinalities),
        title_patterns=tuple(args.title_patterns.split(",")) if args.title_patterns else ("test", "ignore"),
    )
    kept, rejects = ds.clean(parsed.records, config)
    all_rejects = parsed.rejects + rejects
    if not kept:
        if args.rejects:
            ds.write_rejects(all_rejects, args.rejects)
        return _fail(EXIT_EMPTY, "empty_dataset")
    ds.write_tickets(kept, args.output)
    if args.rejects:
        ds.write_rejects(all_rejects, args.rejects)
    print(f"kept {len(kept)} records, rejected {len(all_rejects)}")
    return EXIT_OK


def cmd_pseudo_embed(args) -> int:
    if args.dims < 8:
        return _fail(EXIT_DIMS, "dims_too_small")
    try:
        parsed = ds.parse_tickets(args.input)
    except OSError as exc:
        return _fail(EXIT_UNREADABLE, f"cannot read {args.input}: {exc}")
    if not parsed.records:
        return _fail(EXIT_EMPTY, "empty_dataset")
    texts = [ds.compose_text(rec) for rec in parsed.records]
    ids = [rec.id for rec in parsed.records]
    matrix = pseudo_embed_matrix(texts, ids, args.dims, args.seed)
    save_embeddings(matrix, args.output)
    print(f"wrote {matrix.rows} x {matrix.dims} embeddings to {args.output}")
    return EXIT_OK


def _load_inputs(args, sweep_spec: dict) -> pl.SweepInputs:
    parsed = ds.parse_tickets(args.tickets)
    if not parsed.records:
        raise ValueError("empty_dataset")
    matrix = load_embeddings(args.embeddings)
    cards = tuple(sweep_spec.get("cardinalities", (5, 4)))
    split_spec = sweep_spec.get("split", {})
    return pl.SweepInputs.from_records(
        parsed.records,
        matrix,
        cards,
        ratios=tuple(split_spec.get("ratios", (0.6, 0.2, 0.2))),
        seed=int(split_spec.get("seed", sweep_spec.get("seed", _default_seed()))),
        append_time_feature=bool(sweep_spec.get("append_time_feature", False)),
    )


def cmd_sweep(args) -> int:
    sweep_spec = {}
    if args.sweep:
        try:
            sweep_spec = json.loads(Path(args.sweep).read_text())
        except OSError as exc:
            return _fail(EXIT_UNREADABLE, f"cannot read {args.sweep}: {exc}")
        except json.JSONDecodeError as exc:
            return _fail(EXIT_CONFIG, f"bad sweep file: {exc}")
    sweep_spec.setdefault("seed", args.seed)
    try:
        inputs = _load_inputs(args, sweep_spec)
    except OSError as exc:
        return _fail(EXIT_UNREADABLE, str(exc))
    except ValueError as exc:
        return _fail(EXIT_EMPTY if "empty" in str(exc) else EXIT_CONFIG, str(exc))
    try:
        configs = pl.enumerate_configs(sweep_spec)
    except pl.ConfigError as exc:
        return _fail(EXIT_CONFIG, f"invalid_config:{exc}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "sweep.json").write_text(json.dumps(sweep_spec, indent=2))
    eval_map = {**pl.default_grid()["eval_splits"], **sweep_spec.get("eval_splits", {})}
    rows = pl.run_sweep(
        configs, inputs, out_dir=out_dir, threads=args.threads, eval_splits_map=eval_map
    )
    failed = sum(1 for r in rows if r.status != "ok")
    print(f"{len(configs)} configs -> {len(rows)} result rows ({failed} failed)")
    print(str(out_dir / "results.csv"))
    return EXIT_OK


def cmd_select_best(args) -> int:
    try:
        rows = pl.read_results_csv(args.results)
    except OSError as exc:
        return _fail(EXIT_UNREADABLE, f"cannot read {args.results}: {exc}")
    try:
        best = pl.select_best(rows, split=args.split)
    except ValueError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    print(json.dumps(best, indent=2))
    return EXIT_OK


def _parse_confusion_csv(path: str) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cells = [c.strip() for c in line.replace(";", ",").split(",") if c.strip()]
            try:
                rows.append([int(c) for c in cells])
            except ValueError:
                if not rows:
                    continue  # header row
                raise ValueError(f"non-integer cell in {path!r}: {line!r}")
    if not rows:
        raise ValueError("no data rows in confusion matrix file")
    width = len(rows[0])
    if any(len(r) != width for r in rows) or len(rows) != width:
        raise ValueError(f"matrix must be square, got {len(rows)} rows of {width}")
    return np.asarray(rows, dtype=np.int64)


def cmd_eval_confusion(args) -> int:
    try:
        cm = _parse_confusion_csv(args.matrix)
    except OSError as exc:
        return _fail(EXIT_UNREADABLE, f"cannot read {args.matrix}: {exc}")
    except ValueError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    report = mets.report_from_confusion(cm)
    reference = {}
    for item in args.reference or []:
        name, _, value = item.partition("=")
        try:
            reference[name] = float(value)
        except ValueError:
            return _fail(EXIT_CONFIG, f"bad --reference entry {item!r}")
    for name, value in report.as_dict().items():
        if name == "per_class_f1":
            rendered = "[" + ", ".join(f"{v:.6f}" for v in value) + "]"
            print(f"{name:<20} {rendered}")
            continue
        rendered = "undefined" if value is None else f"{value:.6f}"
        if name in reference:
            delta = "" if value is None else f"  delta={value - reference[name]:+.6f}"
            print(f"{name:<20} computed={rendered}  reference={reference[name]:.6f}{delta}")
        else:
            print(f"{name:<20} {rendered}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        rows = pl.read_results_csv(args.results)
    except OSError as exc:
        return _fail(EXIT_UNREADABLE, f"cannot read {args.results}: {exc}")
    if not rows:
        return _fail(EXIT_EMPTY, "no rows in results file")
    lines = ["| " + " | ".join(pl.CSV_COLUMNS) + " |"]
    lines.append("|" + "|".join(["---"] * len(pl.CSV_COLUMNS)) + "|")
    for row in rows:
        lines.append("| " + " | ".join(row.get(c, "") for c in pl.CSV_COLUMNS) + " |")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(args.out)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cardinalities(text: str) -> tuple[int, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected U,I")
    return parts[0], parts[1]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="priopipe",
        description="Benchmark engine for embedding-based ticket prioritization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="clean raw tickets")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--rejects", default=None)
    p.add_argument("--cardinalities", type=_cardinalities, default=(5, 4))
    p.add_argument("--title-patterns", default=None, help="comma-separated noise patterns")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("pseudo-embed", help="hash-based offline embeddings")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--dims", type=int, default=64)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.set_defaults(func=cmd_pseudo_embed)

    p = sub.add_parser("sweep", help="run the pipeline combination sweep")
    p.add_argument("--tickets", required=True, help="cleaned ticket JSONL")
    p.add_argument("--embeddings", required=True, help="EMBV1 file")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--sweep", default=None, help="sweep definition JSON")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("select-best", help="pick the best row from results.csv")
    p.add_argument("--results", required=True)
    p.add_argument("--split", default="val")
    p.set_defaults(func=cmd_select_best)

    p = sub.add_parser("eval-confusion", help="metrics from a confusion matrix CSV")
    p.add_argument("--matrix", required=True)
    p.add_argument(
        "--reference",
        action="append",
        metavar="NAME=VALUE",
        help="externally reported value printed beside the computed one",
    )
    p.set_defaults(func=cmd_eval_confusion)

    p = sub.add_parser("report", help="render results.csv as markdown")
    p.add_argument("--results", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
