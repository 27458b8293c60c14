"""Command line: roughwalk-plots --hist a.csv --hist b.csv --out fig.png
[--overlay-normal] [--title ...]"""

from __future__ import annotations

import argparse
import sys

from .render import PlotSpec, SchemaError, render_histograms


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roughwalk-plots",
        description="Render histogram CSVs (bin_left,bin_right,count) into a multi-panel figure")
    parser.add_argument("--hist", action="append", required=True, metavar="CSV",
                        help="histogram CSV; repeat for up to four panels")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--overlay-normal", action="store_true",
                        help="overlay the standard normal density on each panel")
    parser.add_argument("--title", action="append", default=[],
                        help="panel title; repeat per panel (defaults to the file stem)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = PlotSpec(inputs=tuple(args.hist), out_path=args.out,
                        titles=tuple(args.title), overlay_normal=args.overlay_normal)
        summary = render_histograms(spec)
    except (SchemaError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {summary.out_path}  ({summary.caption})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
