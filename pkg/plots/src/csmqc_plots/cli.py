"""Standalone plotting CLI: render one experiment CSV to an image file.

Exit codes: 0 success, 1 bad input (missing file/column, unknown kind).
"""
from __future__ import annotations

import argparse
import sys

from . import api


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csmqc-plot", description=__doc__)
    parser.add_argument("input", help="experiment CSV file")
    parser.add_argument("-o", "--out", help="output image path (default: <input>.png)")
    parser.add_argument(
        "--kind", choices=("auto",) + api.KINDS, default="auto", help="figure kind"
    )
    parser.add_argument("--xscale", choices=("linear", "log"), default=None)
    parser.add_argument("--yscale", choices=("linear", "log"), default=None)
    return parser


def run(argv) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    out = args.out or str(args.input).removesuffix(".csv") + ".png"
    try:
        if args.kind == "auto":
            path = api.render_auto(args.input, out)
        else:
            spec = api.PlotSpec(
                inputs=(args.input,),
                kind=args.kind,
                out_path=out,
                xscale=args.xscale,
                yscale=args.yscale,
            )
            path = api.render(spec)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
