"""GSFIM (n_t=3, n_rf=2, n_f=4, k=7) against MIMO-OFDM with two RF chains."""
from _common import base_parser, sweep


def main():
    p = base_parser(__doc__, [6, 10, 14, 16, 18])
    p.add_argument("--N", type=int, default=8, help="subcarriers (8 or 16)")
    p.add_argument("--nr", type=int, default=4)
    args = p.parse_args()
    common = dict(n_r=args.nr, N=args.N, L=4, M=4)
    g = sweep(args, f"gsfim_N{args.N}", scheme="gsfim", n_t=3, n_rf=2, n_f=4, k=7, **common)
    m = sweep(args, f"mimo_ofdm_N{args.N}", scheme="mimo-ofdm", n_rf=2, **common)
    for a, b in zip(g, m):
        better = "GSFIM" if a.ber < b.ber else "MIMO-OFDM"
        print(f"{a.snr_db:5.1f} dB  gsfim={a.ber:.3e}  mimo-ofdm={b.ber:.3e}  better: {better}")


if __name__ == "__main__":
    main()
