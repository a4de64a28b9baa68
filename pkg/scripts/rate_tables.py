"""Write every rate table and rate curve as CSV."""
import argparse
from pathlib import Path

from indexmod.harness import RATE_SERIES, rows_to_csv, run_rate_report


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--outdir", type=Path, default=Path("results"))
    args = p.parse_args()
    args.outdir.mkdir(parents=True, exist_ok=True)
    for name in RATE_SERIES:
        rows = run_rate_report(name)
        rows_to_csv(rows, args.outdir / f"{name}.csv")
        print(f"{name}: {len(rows)} rows")


if __name__ == "__main__":
    main()
