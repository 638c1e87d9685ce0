"""Frame success against carrier phase drift, with and without tracking."""
import argparse

from batnet import ChannelProfile, ModemConfig
from batnet.channel_sim import velocity_for_drift
from batnet.evaluation import run_trial


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--drifts", default="0,0.5,1,2,4,8", help="rad/s")
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--payload-len", type=int, default=64)
    args = ap.parse_args()

    cfg = ModemConfig()
    print(f"{'rad/s':>6} {'tracked':>8} {'untracked':>10}")
    for d in (float(v) for v in args.drifts.split(",")):
        prof = ChannelProfile(relative_velocity_mps=velocity_for_drift(d, cfg.carrier_freq_hz))
        counts = [sum(run_trial(cfg, prof, s, args.payload_len, track_phase=t).payload_ok
                      for s in range(args.trials)) for t in (True, False)]
        print(f"{d:6g} {counts[0]:8d} {counts[1]:10d}")


if __name__ == "__main__":
    main()
