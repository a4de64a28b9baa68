"""Command line front end: ``indexmod <subcommand> ...``.

Exit status: 0 ok, 1 usage or configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import rates
from .harness import (
    RATE_SERIES,
    ConfigError,
    load_config,
    rows_to_csv,
    run_ber_sweep,
    run_rate_report,
    write_records,
)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_rate(a):
    rows = []
    for n_rf in a.nrf:
        rep = rates.gsim_rate(a.nt, n_rf, a.M)
        rows.append({"n_t": a.nt, "n_rf": n_rf, "M": a.M,
                     "antenna_index_bits": rep.antenna_index_bits,
                     "modulation_bits": rep.modulation_bits, "rate_bpcu": rep.rate_bpcu})
    _emit(rows_to_csv(rows), a.out)


def _cmd_rate_max(a):
    rows = []
    for n_t in a.nt:
        r_max, n_opt = rates.gsim_rate_max(n_t, a.M)
        sm = n_t * (a.M.bit_length() - 1)
        rows.append({"n_t": n_t, "M": a.M, "rate_max": r_max, "n_rf_opt": n_opt,
                     "n_rf_mid": rates.min_rf_for_rate(n_t, a.M, sm), "sm_rate": sm,
                     "exceeds_sm": rates.theorem1_holds(n_t, a.M)})
    _emit(rows_to_csv(rows), a.out)


def _cmd_bounds(a):
    rows = []
    if a.rmax:
        b = rates.gsim_rmax_bounds(a.nt, a.M)
        rows.append({"n_t": a.nt, "n_rf": "max", "M": a.M, "lower": b.lower,
                     "rate_bpcu": b.exact, "upper": b.upper, "f_value": b.f_value})
    else:
        for n_rf in a.nrf or range(1, a.nt):
            b = rates.gsim_rate_bounds(a.nt, n_rf, a.M)
            rows.append({"n_t": a.nt, "n_rf": n_rf, "M": a.M, "lower": b.lower,
                         "rate_bpcu": b.exact, "upper": b.upper, "f_value": b.f_value})
    _emit(rows_to_csv(rows), a.out)


def _cmd_gsfim_rate(a):
    k = a.k if a.k is not None else rates.optimize_k(a.nrf, a.nf, a.M)[0]
    rep = rates.gsfim_rate(a.nt, a.nrf, a.N, a.nf, k, a.M, a.L)
    row = {"n_t": a.nt, "n_rf": a.nrf, "N": a.N, "n_f": a.nf, "n_b": rep.n_b, "k": k, "M": a.M,
           "L": a.L, "R_A": float(rep.R_A), "R_F": float(rep.R_F), "R_Q": float(rep.R_Q),
           "rate_bpcu": float(rep.total), "rate_exact": str(rep.total),
           "mimo_ofdm_rate": float(rates.mimo_ofdm_rate(a.nrf, a.N, a.M, a.L))}
    _emit(rows_to_csv([row]), a.out)


def _cmd_tables(a):
    series = "table2" if a.table2 or not a.series else a.series
    _emit(rows_to_csv(run_rate_report(series)), a.out)


def _cmd_ber(a):
    sim = load_config(a.config)
    over = {}
    if a.seed is not None:
        over["seed"] = a.seed
    if a.workers is not None:
        over["workers"] = a.workers
    if over:
        sim = sim.replace(**over)
    progress = None
    if a.verbose:
        def progress(rec):
            print(f"{rec.scheme}/{rec.detector} snr={rec.snr_db:g} dB ber={rec.ber:.3e} "
                  f"({rec.bit_errors} errors, {rec.trials} trials)", file=sys.stderr)
    records = run_ber_sweep(sim, progress)
    _emit(write_records(records, fmt=a.format, timing=not a.no_timing), a.out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="indexmod", description="GSIM/GSFIM rate analysis and BER simulation")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("rate", help="GSIM rate for (n_t, n_rf, M)")
    s.add_argument("--nt", type=int, required=True)
    s.add_argument("--nrf", type=int, nargs="+", required=True)
    s.add_argument("--M", type=int, required=True)
    s.set_defaults(func=_cmd_rate)

    s = sub.add_parser("rate-max", help="maximum GSIM rate and the RF chains it needs")
    s.add_argument("--nt", type=int, nargs="+", required=True)
    s.add_argument("--M", type=int, required=True)
    s.set_defaults(func=_cmd_rate_max)

    s = sub.add_parser("bounds", help="integer bounds on the GSIM rate")
    s.add_argument("--nt", type=int, required=True)
    s.add_argument("--nrf", type=int, nargs="*")
    s.add_argument("--M", type=int, required=True)
    s.add_argument("--rmax", action="store_true", help="bound R_max instead of each n_rf")
    s.set_defaults(func=_cmd_bounds)

    s = sub.add_parser("gsfim-rate", help="GSFIM rate split into antenna/frequency/symbol terms")
    s.add_argument("--nt", type=int, required=True)
    s.add_argument("--nrf", type=int, required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--nf", type=int, required=True)
    s.add_argument("--k", type=int, help="active cells per sub-matrix (default: rate-optimal)")
    s.add_argument("--M", type=int, required=True)
    s.add_argument("--L", type=int, required=True)
    s.set_defaults(func=_cmd_gsfim_rate)

    s = sub.add_parser("tables", help="rate tables and curve data")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--table2", action="store_true", help="RF savings / rate increase table")
    g.add_argument("--series", choices=sorted(RATE_SERIES))
    s.set_defaults(func=_cmd_tables)

    s = sub.add_parser("ber", help="Monte Carlo BER sweep from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--no-timing", action="store_true", help="write wall_time_s as 0")
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(func=_cmd_ber)

    for s in sub.choices.values():
        s.add_argument("--out", help="output path (default: stdout)")
        if s.prog.endswith("ber"):
            s.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:          # --help
        return EXIT_OK if not e.code else EXIT_USAGE
    try:
        args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
