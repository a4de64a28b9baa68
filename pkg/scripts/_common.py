"""Shared helpers for the experiment scripts."""
from __future__ import annotations

import argparse
from pathlib import Path

from indexmod.harness import SimConfig, run_ber_sweep, snr_at_ber, write_records


def base_parser(description: str, snr: list[float]) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--snr", type=float, nargs="+", default=snr, help="SNR points in dB")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--min-errors", type=int, default=200)
    p.add_argument("--max-trials", type=int, default=200_000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--outdir", type=Path, default=Path("results"))
    return p


def sweep(args, name: str, **cfg):
    sim = SimConfig.from_mapping({"snr_db": args.snr, "seed": args.seed,
                                  "min_bit_errors": args.min_errors,
                                  "max_trials": args.max_trials, "workers": args.workers, **cfg})
    recs = run_ber_sweep(sim, progress=lambda r: print(
        f"  {name:<14} {r.snr_db:6.1f} dB  ber={r.ber:.3e}  ({r.bit_errors} errors / {r.trials} trials)"))
    args.outdir.mkdir(parents=True, exist_ok=True)
    write_records(recs, args.outdir / f"{name}.csv")
    return recs


def report_crossing(label: str, recs, target: float = 1e-2) -> float:
    s = snr_at_ber(recs, target)
    print(f"{label}: BER {target:g} at {s:.2f} dB")
    return s
