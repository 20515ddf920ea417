"""Render one benchmark figure from a simulator output directory."""

from __future__ import annotations

import argparse
import sys

from .figures import PlotkitError, render, spec_from_manifest

FIGURES = ("fig1", "fig2", "fig3")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plotkit",
                                     description="Render trajectory comparison figures")
    parser.add_argument("--figure", required=True, choices=FIGURES)
    parser.add_argument("--in", dest="in_dir", required=True,
                        help="simulator output directory (manifest.json + CSVs)")
    parser.add_argument("--out", required=True, help="directory for the PNG")
    args = parser.parse_args(argv)
    try:
        spec = spec_from_manifest(args.in_dir, args.figure)
        path = render(spec, args.out)
    except PlotkitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
