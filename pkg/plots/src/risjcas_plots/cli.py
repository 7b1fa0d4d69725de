"""Command line wrapper: plots <kind> --in <csv...> --out <file>."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .render import KINDS, MissingColumnError, PlotJob, render


def _parse_group(pairs):
    filters = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ValueError(f"--group expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        filters[key] = value
    return filters


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots", description="render experiment CSVs as figures")
    parser.add_argument("kind", choices=sorted(KINDS))
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        type=Path, help="input CSV file(s)")
    parser.add_argument("--out", required=True, type=Path,
                        help="output image path (.png/.pdf/.svg)")
    parser.add_argument("--group", nargs="*", default=[],
                        help="key=value row filters applied before grouping")
    args = parser.parse_args(argv)
    try:
        job = PlotJob(csv_paths=args.inputs, kind=args.kind, out_path=args.out,
                      group_filters=_parse_group(args.group))
        render(job)
    except (MissingColumnError, ValueError, OSError) as exc:
        print(f"plots: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
