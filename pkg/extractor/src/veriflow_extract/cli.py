"""Command-line adapter producing feature-view files for the modeling toolkit.

    veriflow-extract embed    --claims claims.jsonl --out DIR [--backend ...]
    veriflow-extract acoustic --claims claims.jsonl --clips DIR --out DIR
    veriflow-extract ivector  --claims claims.jsonl --table table.csv --out DIR

Exit codes: 0 success (possibly with per-clip warnings), 1 usage error,
2 extraction failure.
"""

from __future__ import annotations

import argparse
import sys

from .acoustic import acoustic_functionals
from .encoders import embed_claims
from .ivectors import ivector_convert
from .viewio import ExtractError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="veriflow-extract", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    embed = sub.add_parser("embed", help="768-d text embedding view")
    embed.add_argument("--claims", required=True)
    embed.add_argument("--out", required=True)
    embed.add_argument("--backend", choices=("transformer", "hashed"), default="transformer")
    embed.add_argument("--model", default="bert-base-uncased")
    embed.add_argument("--name", default="bert")

    acoustic = sub.add_parser("acoustic", help="6373-d acoustic functional view")
    acoustic.add_argument("--claims", required=True)
    acoustic.add_argument("--clips", required=True, help="directory with <claim_id>.wav files")
    acoustic.add_argument("--out", required=True)
    acoustic.add_argument("--backend", choices=("builtin", "opensmile"), default="builtin")
    acoustic.add_argument("--name", default="compare")
    acoustic.add_argument("--strict", action="store_true", help="fail on the first bad clip")

    ivec = sub.add_parser("ivector", help="validate + re-key a 600-d i-vector table")
    ivec.add_argument("--claims", required=True)
    ivec.add_argument("--table", required=True)
    ivec.add_argument("--out", required=True)
    ivec.add_argument("--name", default="ivector")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code else 0
    try:
        if args.command == "embed":
            path = embed_claims(args.claims, args.out, backend=args.backend, model=args.model, view_name=args.name)
            print(f"wrote {path}")
        elif args.command == "acoustic":
            path, errors = acoustic_functionals(
                args.claims, args.clips, args.out, view_name=args.name, backend=args.backend, strict=args.strict
            )
            for msg in errors:
                print(f"clip error: {msg}", file=sys.stderr)
            print(f"wrote {path} ({len(errors)} clip errors)")
        elif args.command == "ivector":
            path, warnings = ivector_convert(args.claims, args.table, args.out, view_name=args.name)
            for msg in warnings:
                print(f"warning: {msg}", file=sys.stderr)
            print(f"wrote {path}")
        return 0
    except ExtractError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
