"""CLI: export cleaned tickets to EMBV1 embeddings, validate EMBV1 files."""

from __future__ import annotations

import argparse
import sys

from ticket_embed_exporter.embv1 import inspect_embv1
from ticket_embed_exporter.exporter import DEFAULT_MODEL, ExportError, ExportJob, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ticket-embed-export",
        description="Sentence-embedding exporter (EMBV1 output)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="embed cleaned tickets")
    p.add_argument("--input", required=True, help="cleaned ticket JSONL")
    p.add_argument("--output", required=True, help="EMBV1 output path")
    p.add_argument("--model", default=DEFAULT_MODEL)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--device", default=None)

    p = sub.add_parser("validate", help="check an EMBV1 file")
    p.add_argument("--input", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "export":
        job = ExportJob(
            input_path=args.input,
            output_path=args.output,
            model_name=args.model,
            batch_size=args.batch_size,
            device=args.device,
        )
        try:
            summary = export(job)
        except (ExportError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"wrote {summary['rows']} x {summary['dims']} embeddings to {summary['output']}")
        return 0
    try:
        report = inspect_embv1(args.input)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if report["status"] == "OK":
        print(f"OK rows={report['rows']} dims={report['dims']}")
        return 0
    print(report["status"])
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
