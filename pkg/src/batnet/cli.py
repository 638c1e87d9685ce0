"""Command-line front end: encode, decode, simulate, evaluate, calibrate.

Payload bytes go to standard output and diagnostics to standard error, so the
commands compose in pipelines::

    batnet encode --text hi --out - | batnet simulate --snr 20 | batnet decode
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .channel_sim import IDENTITY, apply_channel, load_profile
from .errors import ConfigInvalid, InvalidProfile, ModemError, PayloadTooLong, UnknownAxis
from .evaluation import (
    DEFAULT_CALIBRATION_FREQS, calibrate, channel_probe, resolve_axis, run_sweep,
    transmission_quality, value_range, write_csv,
)
from .decoder import symbol_phase_track
from .modem_core import ModemConfig, build_frame, load_config
from .modulator import modulate
from .receiver import receive
from .wavio import read_wav, write_wav

CONFIG_ENV = "BATNET_CONFIG"


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


# -- argument groups -----------------------------------------------------------

def _add_modem_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("modem")
    g.add_argument("--freq", type=float, help="carrier frequency in Hz")
    g.add_argument("--symbol-len", type=int, help="symbol period in samples")
    g.add_argument("--transition-len", type=int, help="transition length in samples")
    g.add_argument("--amp", type=float, help="transmit amplitude in (0, 1]")


def _add_channel_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("channel")
    g.add_argument("--profile", help="channel profile file (key = value lines)")
    g.add_argument("--distance", type=float, help="distance in metres")
    g.add_argument("--angle-tx", type=float, help="transmitter orientation in degrees")
    g.add_argument("--angle-rx", type=float, help="receiver orientation in degrees")
    g.add_argument("--snr", type=float, help="in-band SNR in dB (default: noiseless)")
    g.add_argument("--velocity", type=float, help="relative velocity in m/s, positive = receding")
    g.add_argument("--skew-ppm", type=float, help="clock skew in ppm")
    g.add_argument("--jam-freq", type=float, help="jammer tone frequency in Hz")
    g.add_argument("--jam-amp", type=float, help="jammer tone amplitude")
    g.add_argument("--seed", type=int, default=0, help="random seed (default 0)")


def modem_config(args) -> ModemConfig:
    base = ModemConfig()
    path = os.environ.get(CONFIG_ENV)
    if path:
        base = load_config(path)
    changes = {}
    for flag, name in (("freq", "carrier_freq_hz"), ("symbol_len", "symbol_period_samples"),
                       ("transition_len", "transition_samples"), ("amp", "amplitude")):
        value = getattr(args, flag, None)
        if value is not None:
            changes[name] = value
    return replace(base, **changes) if changes else base


def channel_profile(args, config: ModemConfig):
    prof = load_profile(args.profile) if args.profile else IDENTITY
    changes = {"rng_seed": args.seed}
    for flag, name in (("distance", "distance_m"), ("angle_tx", "tx_angle_deg"),
                       ("angle_rx", "rx_angle_deg"), ("snr", "snr_db"),
                       ("velocity", "relative_velocity_mps"), ("skew_ppm", "clock_skew_ppm")):
        value = getattr(args, flag)
        if value is not None:
            changes[name] = value
    if args.jam_freq is not None:
        amp = args.jam_amp if args.jam_amp is not None else config.amplitude
        changes["jammer"] = (args.jam_freq, amp)
    elif args.jam_amp is not None:
        raise UsageError("--jam-amp needs --jam-freq")
    return replace(prof, **changes)


def _payload(args) -> bytes:
    if args.text is not None and args.file is not None:
        raise UsageError("give either --text or --file, not both")
    if args.text is not None:
        return args.text.encode("utf-8")
    if args.file is not None:
        if args.file == "-":
            return sys.stdin.buffer.read()
        with open(args.file, "rb") as fh:
            return fh.read()
    raise UsageError("one of --text or --file is required")


# -- commands ------------------------------------------------------------------

def cmd_encode(args) -> int:
    config = modem_config(args)
    payload = _payload(args)
    try:
        frame = build_frame(payload, config)
    except PayloadTooLong as exc:
        _err(f"error: {exc}")
        return 1
    pcm = modulate(frame, config)
    write_wav(args.out, pcm)
    n = len(frame.symbol_sequence)
    _err(f"symbols: {n}")
    _err(f"samples: {len(pcm)}")
    _err(f"duration: {len(pcm) / config.sample_rate_hz:.4f} s")
    _err(f"raw rate: {config.raw_bit_rate:.1f} bit/s")
    _err(f"effective rate: {config.effective_bit_rate:.2f} bit/s")
    return 0


def cmd_decode(args) -> int:
    config = modem_config(args)
    pcm = read_wav(args.input)
    if pcm.sample_rate_hz != config.sample_rate_hz:
        raise UsageError(f"WAV rate {pcm.sample_rate_hz} Hz, expected {config.sample_rate_hz} Hz")
    frames = receive(pcm, config, track_phase=not args.no_phase_track)
    if not frames:
        _err("no sync")
        return 1
    frame = frames[0]
    _err(f"sync offset: {frame.sync.frame_start_sample} samples")
    _err(f"sync correlation: {frame.sync.correlation:.3f}")
    _err(f"reference phase: {frame.sync.reference_phase_rad:+.3f} rad")
    if frame.result is None:
        _err(frame.error or "decode failed")
        return 1
    res = frame.result
    _err("phase track: " + " ".join(f"{p:+.3f}" for p in res.cumulative_phase_track))
    _err(f"blocks failed: {res.blocks_failed}, symbol flips: {res.flips_used}")
    if args.truth is not None:
        with open(args.truth, "rb") as fh:
            truth = fh.read()
        sent = build_frame(truth, config).block_symbols
        n = min(len(sent), len(frame.softs))
        phases = symbol_phase_track(res, n, config)
        q = transmission_quality(sent[:n], frame.softs[:n], phases)
        quality = (q.symbols_correct + 0.5 * q.symbols_adjacent) / len(sent)
        _err(f"quality: {quality:.4f}")
    if args.out == "-":
        sys.stdout.buffer.write(res.payload)
        sys.stdout.buffer.flush()
    else:
        with open(args.out, "wb") as fh:
            fh.write(res.payload)
    if len(frames) > 1:
        _err(f"{len(frames) - 1} further frame(s) ignored")
    if res.blocks_failed:
        _err("decode failed: some blocks did not pass CRC")
        return 1
    return 0


def cmd_simulate(args) -> int:
    config = modem_config(args)
    profile = channel_profile(args, config)
    pcm = read_wav(args.input)
    out = apply_channel(pcm, profile, config.carrier_freq_hz)
    write_wav(args.out, out)
    return 0


def cmd_evaluate(args) -> int:
    config = modem_config(args)
    profile = channel_profile(args, config)
    axis = resolve_axis(args.axis)
    try:
        values = value_range(args.values)
    except ValueError as exc:
        raise UsageError(f"bad --values: {exc}") from None
    if not values:
        raise UsageError("--values is empty")
    reports = run_sweep(config, profile, axis, values, trials=args.trials, seed0=args.seed,
                        track_phase=not args.no_phase_track, workers=args.workers)
    if args.out == "-":
        write_csv(reports, sys.stdout, axis)
    else:
        with open(args.out, "w", newline="") as fh:
            write_csv(reports, fh, axis)
    groups: dict = {}
    for r in reports:
        groups.setdefault(r.axis_value, []).append(r.quality)
    for value, qs in groups.items():
        _err(f"{axis}={value:g}: mean quality {np.mean(qs):.4f}")
    return 0


def cmd_calibrate(args) -> int:
    config = modem_config(args)
    profile = channel_profile(args, config)
    freqs = value_range(args.values) if args.values else list(DEFAULT_CALIBRATION_FREQS)
    probe = channel_probe(config, profile, seed=args.seed, track_phase=not args.no_phase_track)
    result = calibrate(probe, freqs, n_trials=args.trials)
    for f, q in result.mean_quality.items():
        print(f"{f:8.0f} Hz  {q:.4f}")
    if result.all_failed:
        _err("warning: no frequency achieved sync; falling back to the lowest")
    print(f"best: {result.best_freq_hz:.0f}")
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="batnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="payload -> WAV")
    _add_modem_flags(p)
    p.add_argument("--text", help="UTF-8 text payload")
    p.add_argument("--file", help="binary payload file ('-' for stdin)")
    p.add_argument("--out", default="-", help="output WAV ('-' for stdout)")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="WAV -> payload")
    _add_modem_flags(p)
    p.add_argument("--in", dest="input", default="-", help="input WAV ('-' for stdin)")
    p.add_argument("--out", default="-", help="payload output ('-' for stdout)")
    p.add_argument("--truth", help="file with the sent payload, to report quality")
    p.add_argument("--no-phase-track", action="store_true", help="disable phase feed-forward")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("simulate", help="pass a WAV through the channel model")
    _add_modem_flags(p)
    _add_channel_flags(p)
    p.add_argument("--in", dest="input", default="-", help="input WAV ('-' for stdin)")
    p.add_argument("--out", default="-", help="output WAV ('-' for stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="parameter sweep to CSV")
    _add_modem_flags(p)
    _add_channel_flags(p)
    p.add_argument("--axis", required=True,
                   help="distance, angle, symbol-len, snr or freq (or a field name)")
    p.add_argument("--values", required=True, help="start:stop:step (inclusive) or a,b,c")
    p.add_argument("--trials", type=int, default=16)
    p.add_argument("--no-phase-track", action="store_true")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--out", default="-", help="CSV output ('-' for stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("calibrate", help="pick the best carrier for a channel")
    _add_modem_flags(p)
    _add_channel_flags(p)
    p.add_argument("--trials", type=int, default=4)
    p.add_argument("--values", help="candidate carriers (default 20000:23500:500)")
    p.add_argument("--no-phase-track", action="store_true")
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "trials", 1) < 1:
        parser.error("--trials must be >= 1")
    try:
        return args.func(args)
    except (UsageError, UnknownAxis, InvalidProfile, ConfigInvalid) as exc:
        parser.error(str(exc))
    except (OSError, ValueError) as exc:
        _err(f"error: {exc}")
        return 2
    except ModemError as exc:
        _err(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
