"""Command-line entry: `plots <figure-id> --in <path> --out <file.png|svg>`."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FIGURE_IDS, FigureError, FigureSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots", description="Render figures from dcflex CSV artifacts"
    )
    parser.add_argument("figure", choices=FIGURE_IDS)
    parser.add_argument(
        "--in", dest="inputs", action="append", required=True, type=Path,
        help="input directory or CSV; repeatable for variance_sweep",
    )
    parser.add_argument("--out", required=True, type=Path, help="output image (.png or .svg)")
    args = parser.parse_args(argv)
    try:
        written = render(FigureSpec(args.figure, tuple(args.inputs), args.out))
    except FigureError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {written}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
