"""Script entry: render every known figure under a results directory.

Usage: vortexnoise-plots RESULTS_DIR [--quiet]

Images land beside their CSV inputs.  Exit 0 when every discovered table
renders; 1 when a table is malformed (message names the missing column) or
no known table exists; 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import SchemaError, discover_figures, render


def run(argv) -> int:
    ap = argparse.ArgumentParser(prog="vortexnoise-plots")
    ap.add_argument("results_dir", type=Path, help="directory with result CSVs")
    ap.add_argument("--quiet", action="store_true")
    try:
        args = ap.parse_args(argv)
    except SystemExit as ex:
        return 2 if ex.code not in (0, None) else 0

    if not args.results_dir.is_dir():
        print(f"not a directory: {args.results_dir}", file=sys.stderr)
        return 2

    specs = discover_figures(args.results_dir)
    if not specs:
        print(f"no known result tables under {args.results_dir}", file=sys.stderr)
        return 1

    status = 0
    for spec in specs:
        try:
            out = render(spec)
            if not args.quiet:
                print(f"{spec.kind}: {spec.csv_path} -> {out}")
        except SchemaError as ex:
            print(f"schema mismatch: {ex}", file=sys.stderr)
            status = 1
    return status


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
