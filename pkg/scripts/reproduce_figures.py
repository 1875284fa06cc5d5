#!/usr/bin/env python3
"""Regenerate the throughput-maxima datasets behind the reference figures.

Writes plot-ready CSV for the small-degree sweep (N <= 5), the N = 20
regime with its full S(G) curve, and the N = 100 regime.
"""

import argparse
from pathlib import Path

from aloha_noma.cli import main as cli_main


def run(outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    jobs = [
        ["analytic-max", "5", "--out", str(outdir / "maxima_n5.csv")],
        ["analytic-max", "20", "--out", str(outdir / "maxima_n20.csv")],
        ["analytic-max", "100", "--out", str(outdir / "maxima_n100.csv")],
        [
            "analytic-curve", "20",
            "--g-min", "0", "--g-max", "25", "--points", "500",
            "--out", str(outdir / "curve_n20.csv"),
        ],
    ]
    for job in jobs:
        code = cli_main(job + ["--no-timestamp"])
        if code != 0:
            raise SystemExit(code)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", type=Path, default=Path("out"))
    run(parser.parse_args().outdir)
