"""plotview command line: render one figure from a JSON spec."""

import argparse
import sys

from .figspec import FigureSpec, SpecError
from .render import plot


def cli_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plotview",
        description="Render a figure from perclr CSV outputs per a JSON spec.",
    )
    parser.add_argument("--spec", required=True, help="path to the FigureSpec JSON file")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        result = plot(FigureSpec.from_file(args.spec))
    except SpecError as exc:
        for msg in exc.errors:
            print(msg, file=sys.stderr)
        return 1
    print(result.path)
    return 0


def main():
    raise SystemExit(cli_main())
