"""Carrier calibration against a device response curve and an optional jammer.

    python scripts/calibration.py --peak 21500 --jam 22500
"""
import argparse

from batnet import ChannelProfile, ModemConfig
from batnet.evaluation import calibrate, channel_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--peak", type=float, help="receiver response peak in Hz (flat if omitted)")
    ap.add_argument("--jam", type=float, help="jammer frequency in Hz")
    ap.add_argument("--snr", type=float, default=10.0)
    ap.add_argument("--trials", type=int, default=4)
    args = ap.parse_args()

    changes = dict(snr_db=args.snr)
    if args.peak:
        p = args.peak
        changes["rx_response"] = ((20000, 0.05), (p - 500, 0.05), (p, 1.0), (p + 500, 0.05),
                                  (24000, 0.05))
    if args.jam:
        changes["jammer"] = (args.jam, 0.5)
    result = calibrate(channel_probe(ModemConfig(), ChannelProfile(**changes)), n_trials=args.trials)
    for f, q in result.mean_quality.items():
        mark = "  <-" if f == result.best_freq_hz else ""
        print(f"{f:8.0f} Hz  {q:.3f}{mark}")
    if result.all_failed:
        print("no frequency achieved sync")


if __name__ == "__main__":
    main()
