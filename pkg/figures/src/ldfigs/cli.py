"""render_figures <out_dir> [--only f11,f15] [--target DIR]"""
from __future__ import annotations

import argparse
import sys

from .render import FIGURE_IDS, FigureInputError, render_all


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render_figures",
        description="Render figure analogs from a lanedep output directory")
    parser.add_argument("out_dir", help="montecarlo output directory")
    parser.add_argument("--only", default=None,
                        help=f"comma-separated subset of {','.join(FIGURE_IDS)}")
    parser.add_argument("--target", default=None,
                        help="directory for the PNGs (default: out_dir)")
    args = parser.parse_args(argv)

    only = None
    if args.only:
        only = [fid.strip() for fid in args.only.split(",") if fid.strip()]
        unknown = [fid for fid in only if fid not in FIGURE_IDS]
        if unknown:
            print(f"unknown figure ids: {', '.join(unknown)}", file=sys.stderr)
            return 2
    try:
        written = render_all(args.out_dir, only=only, target_dir=args.target)
    except FigureInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
