"""Gibbs, MMSE and brute-force ML detection on the same channel draws."""
from _common import base_parser, report_crossing, sweep


def main():
    p = base_parser(__doc__, [0, 3, 6, 9, 12, 15])
    p.add_argument("--nt", type=int, default=4)
    p.add_argument("--nrf", type=int, default=3)
    p.add_argument("--nr", type=int, default=4)
    p.add_argument("--M", type=int, default=4)
    args = p.parse_args()
    link = dict(scheme="gsim", n_t=args.nt, n_rf=args.nrf, n_r=args.nr, M=args.M)
    tag = f"{args.nt}_{args.nrf}"
    ml = sweep(args, f"ml_{tag}", detector="ml", **link)
    gibbs = sweep(args, f"gibbs_{tag}", detector="gibbs", **link)
    sweep(args, f"mmse_{tag}", detector="mmse", **link)
    gap = report_crossing("Gibbs", gibbs) - report_crossing("ML", ml)
    print(f"Gibbs - ML at BER 1e-2: {gap:+.2f} dB")


if __name__ == "__main__":
    main()
