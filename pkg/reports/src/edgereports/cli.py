"""Command line entry: regenerate every figure from a directory of CSV artifacts."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import regenerate_all
from .tables import SchemaError, scan_directory


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="edgesched-report")
    parser.add_argument("--input", required=True, help="directory of run/switch/curve CSVs")
    parser.add_argument("--out", required=True, help="directory for the SVG figures")
    args = parser.parse_args(argv)

    root = Path(args.input)
    if not root.is_dir():
        print(f"error: input directory {root} does not exist", file=sys.stderr)
        return 2
    try:
        artifacts = scan_directory(root)
        written = regenerate_all(artifacts, Path(args.out))
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not written:
        print("error: no recognizable CSV artifacts found", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
