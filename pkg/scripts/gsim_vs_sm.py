"""(4,2)-GSIM/4-QAM against (2,2)-SM/8-QAM at 6 bpcu, ML detection, n_r=2."""
from _common import base_parser, report_crossing, sweep


def main():
    args = base_parser(__doc__, [0, 4, 8, 12, 16, 20, 24]).parse_args()
    g = sweep(args, "gsim_4_2_qam4", scheme="gsim", detector="ml", n_t=4, n_rf=2, n_r=2, M=4)
    s = sweep(args, "sm_2_2_qam8", scheme="sm", detector="ml", n_t=2, n_r=2, M=8)
    gain = report_crossing("SM", s) - report_crossing("GSIM", g)
    print(f"GSIM gain at BER 1e-2: {gain:.2f} dB")
    low = [(a.snr_db, a.ber, b.ber) for a, b in zip(g, s) if b.ber < a.ber]
    print("SNR points where SM is better:", [x[0] for x in low] or "none")


if __name__ == "__main__":
    main()
