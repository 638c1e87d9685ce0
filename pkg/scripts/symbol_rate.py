"""Quality against symbol length at a fixed noisy channel.

    python scripts/symbol_rate.py --snr 6 --trials 16 --csv symbol_rate.csv
"""
import argparse

from batnet import ChannelProfile, ModemConfig
from batnet.evaluation import mean_quality_by_value, run_sweep, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--snr", type=float, default=6.0)
    ap.add_argument("--lengths", default="64,80,96,112,128,160,224")
    ap.add_argument("--trials", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv")
    args = ap.parse_args()

    lengths = [int(v) for v in args.lengths.split(",")]
    reports = run_sweep(ModemConfig(), ChannelProfile(snr_db=args.snr), "symbol_period_samples",
                        lengths, trials=args.trials, seed0=args.seed)
    print(f"{'T_s':>5} {'raw bit/s':>10} {'quality':>8}")
    for ts, q in mean_quality_by_value(reports).items():
        print(f"{ts:5.0f} {48000 / ts * 3:10.1f} {q:8.3f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            write_csv(reports, fh, "symbol_period_samples")


if __name__ == "__main__":
    main()
