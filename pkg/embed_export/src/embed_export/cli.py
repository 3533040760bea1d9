"""Command-line adapter: dataset in, NRCM matrix files out."""

from __future__ import annotations

import argparse
import sys

from .encoders import CLASSIFIERS, ENCODERS, build_from_spec
from .export import export_embeddings, export_predictions
from .records import ExportError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="Run an encoder or classifier over a JSONL dataset and write NRCM files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embeddings", help="write a kind-0 embeddings file")
    p.add_argument("--data", required=True, help="dataset JSONL file")
    p.add_argument("--encoder", default="hashing",
                   help="encoder spec, e.g. hashing:dim=64,seed=0 or module:factory")
    p.add_argument("--out", required=True, help="output .nrcm path")

    p = sub.add_parser("predictions", help="write a kind-1 predictions file")
    p.add_argument("--data", required=True, help="dataset JSONL file")
    p.add_argument("--classifier", default="uniform",
                   help="classifier spec, e.g. uniform | centroid:train=train.jsonl "
                        "| onehot:train=train.jsonl | module:factory")
    p.add_argument("--labels", required=True, help="label-space file (labels copied verbatim)")
    p.add_argument("--out", required=True, help="output .nrcm path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "embeddings":
            n = export_embeddings(args.data, build_from_spec(args.encoder, ENCODERS), args.out)
        else:
            n = export_predictions(
                args.data, build_from_spec(args.classifier, CLASSIFIERS), args.labels, args.out
            )
        print(f"wrote {n} rows to {args.out}")
        return 0
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
