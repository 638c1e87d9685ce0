"""Transmission-quality metric, calibration and parameter sweeps."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .channel_sim import ChannelProfile, apply_channel
from .decoder import decode_frame, soft_values, symbol_phase_track
from .demodulator import center_offset, detect_preamble, mix_to_baseband, nearest_index, sample_symbols
from .errors import HeaderError, LengthMismatch, UnknownAxis
from .modem_core import CONSTELLATION_SIZE, ModemConfig, build_frame
from .modulator import PcmBuffer, modulate

DEFAULT_CALIBRATION_FREQS = tuple(float(f) for f in np.arange(20000.0, 23500.0 + 1, 500.0))
LEAD_IN_SAMPLES = 1200
TAIL_SAMPLES = 1200

AXES = {
    "distance_m": "profile",
    "tx_angle_deg": "profile",
    "snr_db": "profile",
    "symbol_period_samples": "config",
    "carrier_freq_hz": "config",
}
AXIS_ALIASES = {
    "distance": "distance_m",
    "angle": "tx_angle_deg",
    "tx_angle": "tx_angle_deg",
    "angle-tx": "tx_angle_deg",
    "snr": "snr_db",
    "symbol-len": "symbol_period_samples",
    "symbol_len": "symbol_period_samples",
    "freq": "carrier_freq_hz",
}


@dataclass(frozen=True)
class QualityReport:
    quality: float
    symbols_total: int
    symbols_correct: int
    symbols_adjacent: int
    bit_errors: int = 0
    blocks_failed: int = 0
    sync_found: bool = True
    seed: int = 0
    flips_used: int = 0
    payload_ok: bool = False
    axis_value: float | None = None
    config_snapshot: ModemConfig | None = field(default=None, repr=False)
    profile_snapshot: ChannelProfile | None = field(default=None, repr=False)

    def scalars(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)
                if f.name not in ("config_snapshot", "profile_snapshot", "axis_value")}


SCALAR_COLUMNS = [f.name for f in fields(QualityReport)
                  if f.name not in ("config_snapshot", "profile_snapshot", "axis_value")]


def score_symbols(sent, decided) -> tuple[int, int]:
    """(exact matches, adjacent-point misses)."""
    diff = np.mod(np.asarray(decided) - np.asarray(sent), CONSTELLATION_SIZE)
    return int(np.sum(diff == 0)), int(np.sum((diff == 1) | (diff == CONSTELLATION_SIZE - 1)))


def transmission_quality(sent, received_softs, phase_track) -> QualityReport:
    """Mean per-symbol score: 1 for the right point, 0.5 for a neighbour."""
    sent = np.asarray(sent, dtype=np.int64)
    values = soft_values(received_softs)
    phases = np.asarray(phase_track, dtype=np.float64)
    if not len(sent) == len(values) == len(phases):
        raise LengthMismatch(f"lengths differ: {len(sent)}, {len(values)}, {len(phases)}")
    decided = nearest_index(np.angle(values) - phases)
    correct, adjacent = score_symbols(sent, decided)
    total = len(sent)
    quality = (correct + 0.5 * adjacent) / total if total else 1.0
    return QualityReport(quality, total, correct, adjacent)


def _bit_errors(sent: bytes, got: bytes | None) -> int:
    if got is None:
        return 8 * len(sent)
    n = min(len(sent), len(got))
    a = np.frombuffer(sent[:n], dtype=np.uint8)
    b = np.frombuffer(got[:n], dtype=np.uint8)
    return int(np.unpackbits(a ^ b).sum()) + 8 * abs(len(sent) - len(got))


def trial_payload(seed: int, payload_len: int) -> bytes:
    return np.random.default_rng(seed).bytes(payload_len)


def run_trial(config: ModemConfig, profile: ChannelProfile, seed: int, payload_len: int = 64,
              track_phase: bool = True, payload: bytes | None = None) -> QualityReport:
    """Send one random frame through the channel and score the reception."""
    if payload is None:
        payload = trial_payload(seed, payload_len)
    frame = build_frame(payload, config)
    lead = LEAD_IN_SAMPLES + seed % config.symbol_period_samples
    tx = np.concatenate((np.zeros(lead), modulate(frame, config).samples, np.zeros(TAIL_SAMPLES)))
    prof = replace(profile, rng_seed=seed)
    rx = apply_channel(PcmBuffer(tx, config.sample_rate_hz), prof, config.carrier_freq_hz)
    sent = frame.block_symbols
    base = dict(seed=seed, config_snapshot=config, profile_snapshot=prof)
    bb = mix_to_baseband(rx, config)
    sync = detect_preamble(bb, config)
    if sync is None:
        return QualityReport(0.0, len(sent), 0, 0, bit_errors=8 * len(payload),
                             blocks_failed=len(frame.data_blocks) + 1, sync_found=False, **base)
    ts = config.symbol_period_samples
    first = config.framing_symbols
    last_idx = bb.end - 1 - sync.frame_start_sample - center_offset(config)
    available = max(0, min(len(sent), last_idx // ts + 1 - first))
    softs = sample_symbols(bb, sync, available, config, first)
    try:
        result = decode_frame(softs, config, track_phase=track_phase) if available else None
    except HeaderError:
        result = None
    phases = (symbol_phase_track(result, available, config) if result is not None
              else np.zeros(available))
    q = transmission_quality(sent[:available], softs, phases)
    total = len(sent)
    got = result.payload if result is not None else None
    return QualityReport(
        quality=(q.symbols_correct + 0.5 * q.symbols_adjacent) / total,
        symbols_total=total,
        symbols_correct=q.symbols_correct,
        symbols_adjacent=q.symbols_adjacent,
        bit_errors=_bit_errors(payload, got),
        blocks_failed=result.blocks_failed if result is not None else len(frame.data_blocks) + 1,
        sync_found=True,
        flips_used=result.flips_used if result is not None else 0,
        payload_ok=got == payload,
        **base,
    )


def resolve_axis(axis: str) -> str:
    name = AXIS_ALIASES.get(axis, axis)
    if name not in AXES:
        raise UnknownAxis(f"unknown sweep axis {axis!r}; choose from {sorted(AXES)}")
    return name


def _apply_axis(config: ModemConfig, profile: ChannelProfile, axis: str, value):
    if AXES[axis] == "config":
        value = int(value) if axis == "symbol_period_samples" else float(value)
        return replace(config, **{axis: value}), profile
    return config, replace(profile, **{axis: float(value)})


def _run_job(job):
    config, profile, seed, payload_len, track_phase, value = job
    return replace(run_trial(config, profile, seed, payload_len, track_phase), axis_value=value)


def run_sweep(base_config: ModemConfig, base_profile: ChannelProfile, axis: str, values,
              trials: int = 16, seed0: int | None = None, track_phase: bool = True,
              payload_len: int = 64, workers: int = 1) -> list[QualityReport]:
    """One report per (value, trial), ordered by value then trial index.

    Trial ``i`` uses seed ``seed0 + i`` for every value, so the same noise
    realisations are reused along the axis.
    """
    axis = resolve_axis(axis)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seed0 = base_profile.rng_seed if seed0 is None else seed0
    jobs = []
    for value in values:
        cfg, prof = _apply_axis(base_config, base_profile, axis, value)
        jobs += [(cfg, prof, seed0 + i, payload_len, track_phase, float(value)) for i in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_run_job, jobs))
    return [_run_job(j) for j in jobs]


def mean_quality_by_value(reports) -> dict[float, float]:
    groups: dict[float, list[float]] = {}
    for r in reports:
        groups.setdefault(r.axis_value, []).append(r.quality)
    return {v: float(np.mean(q)) for v, q in groups.items()}


def write_csv(reports, fh, axis: str) -> None:
    writer = csv.writer(fh)
    writer.writerow([axis] + SCALAR_COLUMNS)
    for r in reports:
        s = r.scalars()
        writer.writerow([r.axis_value] + [s[c] for c in SCALAR_COLUMNS])


# -- calibration ---------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationResult:
    best_freq_hz: float
    mean_quality: dict
    all_failed: bool


def calibrate(probe, frequencies=DEFAULT_CALIBRATION_FREQS, n_trials: int = 4) -> CalibrationResult:
    """Pick the frequency with the best mean quality; ties go to the lowest.

    ``probe(freq_hz, trial_index)`` returns a QualityReport.
    """
    frequencies = sorted(float(f) for f in frequencies)
    if not frequencies:
        raise ValueError("no frequencies to calibrate over")
    means, any_sync = {}, False
    for f in frequencies:
        reports = [probe(f, t) for t in range(n_trials)]
        any_sync |= any(r.sync_found for r in reports)
        means[f] = float(np.mean([r.quality for r in reports]))
    best = max(frequencies, key=lambda f: (round(means[f], 12), -f))
    return CalibrationResult(best, means, not any_sync)


def channel_probe(config: ModemConfig, profile: ChannelProfile, payload_len: int = 64,
                  seed: int = 0, track_phase: bool = True):
    """Probe that runs simulated trials at each candidate carrier."""
    payload = trial_payload(seed, payload_len)

    def probe(freq_hz: float, trial: int) -> QualityReport:
        cfg = replace(config, carrier_freq_hz=freq_hz)
        return run_trial(cfg, profile, seed + trial, track_phase=track_phase, payload=payload)

    return probe


def value_range(spec: str) -> list[float]:
    """``"1:8:1"`` (inclusive) or ``"1,2,5"`` -> list of floats."""
    if ":" in spec:
        start, stop, step = (float(v) for v in spec.split(":"))
        if step <= 0:
            raise ValueError("step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(n)]
    return [float(v) for v in spec.split(",") if v.strip()]
