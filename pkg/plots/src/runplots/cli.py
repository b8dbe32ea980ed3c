"""Command-line wrapper: one panel per invocation.

Exit codes: 0 success, 1 bad arguments or unreadable/incomplete CSV.
"""

import argparse
import sys

from .render import PANELS, MissingColumnError, render


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="runplots",
        description="Render filter-run CSV logs into comparison panels.")
    parser.add_argument("--csv", nargs="+", required=True,
                        help="run-log CSV path(s)")
    parser.add_argument("--panel", choices=PANELS, required=True)
    parser.add_argument("--out", required=True, help="output PNG path")
    args = parser.parse_args(argv)
    try:
        render(args.csv, args.panel, args.out)
    except (MissingColumnError, OSError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
