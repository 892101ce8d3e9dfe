"""Command line: leofl-plot --inputs a.csv b.csv --labels A B --out fig.svg."""
from __future__ import annotations

import argparse
import sys

from .figures import plot_accuracy
from .series import SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leofl-plot",
        description="Plot accuracy vs. simulated time from metrics CSV files.")
    parser.add_argument("--inputs", nargs="+", required=True,
                        help="metrics CSV paths")
    parser.add_argument("--labels", nargs="*", default=None,
                        help="legend labels, one per input")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--time-unit", choices=["s", "h"], default="s")
    parser.add_argument("--smooth", type=int, default=0,
                        help="moving-average window (off by default)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    labels = args.labels if args.labels else None
    try:
        plot_accuracy(args.inputs, labels, args.out, time_unit=args.time_unit,
                      smooth=args.smooth)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


def console_main() -> None:
    sys.exit(main())
