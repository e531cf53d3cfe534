"""Command line for rendering crowdcast figures."""

from __future__ import annotations

import argparse
import sys

from crowdfig.plots import KINDS, FigureSpec, render
from crowdfig.schemas import SchemaError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdfig", description="render figures from crowdcast CSV outputs"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure kind")
    p.add_argument("kind", choices=sorted(KINDS))
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   help="input CSV file(s)")
    p.add_argument("--out", dest="output", required=True,
                   help="output image path")
    p.add_argument("--x-label", default="")
    p.add_argument("--y-label", default="")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        inputs=args.inputs,
        output=args.output,
        x_label=args.x_label,
        y_label=args.y_label,
    )
    try:
        render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
