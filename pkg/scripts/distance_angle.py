"""Quality against distance and transmitter angle, optionally with drift
correction switched off.

    python scripts/distance_angle.py --snr 18 --no-phase-track
"""
import argparse

from batnet import ChannelProfile, ModemConfig
from batnet.evaluation import mean_quality_by_value, run_sweep


def show(title, means):
    print(title)
    for v, q in means.items():
        print(f"  {v:6g}  {q:.3f}  {'#' * round(40 * q)}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--snr", type=float, default=18.0)
    ap.add_argument("--angle-distance", type=float, default=3.0)
    ap.add_argument("--velocity", type=float, default=0.0, help="receding speed in m/s")
    ap.add_argument("--trials", type=int, default=16)
    ap.add_argument("--no-phase-track", action="store_true")
    args = ap.parse_args()

    cfg = ModemConfig()
    track = not args.no_phase_track
    prof = ChannelProfile(snr_db=args.snr, relative_velocity_mps=args.velocity)
    dist = run_sweep(cfg, prof, "distance_m", range(1, 9), trials=args.trials, track_phase=track)
    show("distance (m)", mean_quality_by_value(dist))
    prof = prof.replace(distance_m=args.angle_distance)
    ang = run_sweep(cfg, prof, "tx_angle_deg", range(0, 181, 30), trials=args.trials,
                    track_phase=track)
    show(f"tx angle (deg) at {args.angle_distance:g} m", mean_quality_by_value(ang))


if __name__ == "__main__":
    main()
