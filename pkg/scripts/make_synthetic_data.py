"""Regenerate the bundled synthetic CSV files under src/svdtr/data."""

from __future__ import annotations

import argparse
from pathlib import Path

from svdtr.synthetic import write_catie_like, write_nefazodone_like

DATA = Path(__file__).resolve().parent.parent / "src" / "svdtr" / "data"


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=DATA)
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    write_catie_like(args.out / "catie_like.csv", n=1000, seed=7)
    write_catie_like(args.out / "two_stage_small.csv", n=20, seed=3)
    write_nefazodone_like(args.out / "nefazodone_like.csv", n=450, seed=11)
    for p in sorted(args.out.glob("*.csv")):
        print(p)


if __name__ == "__main__":
    main()
