"""Run one or more shipped figure manifests and write CSVs to a directory.

    python scripts/reproduce_figure.py fig10 fig16 --outdir results --shots 100000
"""
import argparse
import sys
from pathlib import Path

from qsensim.cli import main, shipped_manifests


def cli():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("figures", nargs="*", help=f"default: all of {', '.join(shipped_manifests())}")
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--shots", type=int)
    ap.add_argument("--jobs", type=int)
    args = ap.parse_args()
    worst = 0
    for fig in args.figures or shipped_manifests():
        argv = ["repro", fig, "--out", str(Path(args.outdir) / f"{fig}.csv")]
        if args.shots:
            argv += ["--shots", str(args.shots)]
        if args.jobs:
            argv += ["--jobs", str(args.jobs)]
        code = main(argv)
        print(f"{fig}: exit {code}", file=sys.stderr)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(cli())
