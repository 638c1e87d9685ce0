"""Baseband conversion, preamble detection and symbol sampling.

The baseband signal is the PCM mixed with ``exp(-2j*pi*f_c*t/f_s)`` (``t`` is the
absolute sample index) and averaged over a window as long as the steady part of
a symbol. It is computed in fixed, absolutely aligned blocks so that a
streaming receiver fed arbitrary chunk sizes reproduces one-shot values bit
for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BufferTooShort
from .modem_core import CONSTELLATION_SIZE, PHASE_STEP, ModemConfig
from .modulator import PcmBuffer

BASEBAND_BLOCK = 8192
SCAN_CHUNK = 65536


@dataclass(frozen=True)
class BasebandSequence:
    samples: np.ndarray
    sample_rate_hz: int
    carrier_freq_hz: float
    offset: int = 0  # absolute index of samples[0]

    def __len__(self):
        return len(self.samples)

    @property
    def end(self) -> int:
        return self.offset + len(self.samples)


@dataclass(frozen=True)
class SyncResult:
    frame_start_sample: int
    reference_phase_rad: float
    preamble_magnitude: float
    accepted: bool
    correlation: float = 0.0


@dataclass(frozen=True)
class SoftSymbol:
    value: complex
    slot_index: int


def window_length(config: ModemConfig) -> int:
    return config.steady_samples


def center_offset(config: ModemConfig) -> int:
    """Offset from a symbol's first sample to its steady-segment center."""
    return window_length(config) // 2


def baseband_block(pcm: np.ndarray, pcm_base: int, start: int, stop: int,
                   config: ModemConfig) -> np.ndarray:
    """Baseband values for absolute indices ``[start, stop)``.

    ``pcm`` holds samples from absolute index ``pcm_base``; anything outside it
    is treated as zero.
    """
    w = window_length(config)
    h = w // 2
    lo, hi = start - h, stop - h + w - 1
    seg = np.zeros(hi - lo)
    a, b = max(lo, pcm_base), min(hi, pcm_base + len(pcm))
    if b > a:
        seg[a - lo:b - lo] = pcm[a - pcm_base:b - pcm_base]
    omega = 2 * math.pi * config.carrier_freq_hz / config.sample_rate_hz
    t = np.arange(lo, hi, dtype=np.float64)
    mixed = seg * np.exp(-1j * omega * t)
    cs = np.concatenate(([0j], np.cumsum(mixed)))
    avg = (cs[w:] - cs[:-w]) / w
    # A constant envelope x leaves avg = x + conj(x) * image_gain; solve for x.
    g0 = np.exp(-2j * omega * np.arange(w)).mean()
    image_gain = g0 * np.exp(-2j * omega * t[:len(avg)])
    return (avg - image_gain * np.conj(avg)) / (1 - abs(g0) ** 2)


def mix_to_baseband(pcm: PcmBuffer, config: ModemConfig) -> BasebandSequence:
    if pcm.sample_rate_hz != config.sample_rate_hz:
        raise ValueError(f"PCM rate {pcm.sample_rate_hz} != configured {config.sample_rate_hz}")
    n = len(pcm.samples)
    if n < window_length(config):
        raise BufferTooShort(f"{n} samples is shorter than the {window_length(config)}-sample window")
    parts = [baseband_block(pcm.samples, 0, s, min(s + BASEBAND_BLOCK, n), config)
             for s in range(0, n, BASEBAND_BLOCK)]
    return BasebandSequence(np.concatenate(parts), config.sample_rate_hz, config.carrier_freq_hz)


# -- detection ---------------------------------------------------------------

def sync_reference(config: ModemConfig) -> tuple[np.ndarray, np.ndarray]:
    """Known frame head (preamble, sync, trailer) and its differential phasors."""
    pattern = np.array([0] * config.preamble_symbols + list(config.sync_pattern)
                       + list(config.trailer_pattern), dtype=np.int64)
    diffs = np.exp(1j * PHASE_STEP * np.diff(pattern))
    return pattern, diffs


def detection_span(config: ModemConfig) -> int:
    """Distance from a candidate frame start to the last baseband index it needs."""
    n_pattern = config.framing_symbols
    return center_offset(config) + (n_pattern - 1) * config.symbol_period_samples


def nearest_index(angle) -> np.ndarray:
    """Nearest constellation index; exact boundaries go to the lower index."""
    x = np.asarray(angle) / PHASE_STEP
    return np.mod(np.ceil(x - 0.5 - 1e-9), CONSTELLATION_SIZE).astype(np.int64)


def sync_metrics(bb: np.ndarray, bb_base: int, first: int, last: int, config: ModemConfig):
    """Gate flag, differential correlation and its normalised magnitude for
    candidate frame starts ``first..last`` (inclusive, absolute)."""
    ts = config.symbol_period_samples
    off = center_offset(config)
    p = config.preamble_symbols
    _, diffs = sync_reference(config)
    n_diff = len(diffs)
    m = last - first + 1
    lo = first + off - bb_base
    seg = bb[lo:lo + m + n_diff * ts]
    d = seg[ts:] * np.conj(seg[:-ts])
    # pair energy, so that slots falling in silence count against a candidate
    e = np.abs(seg) ** 2
    e = (e[ts:] + e[:-ts]) / 2
    corr = np.zeros(m, dtype=complex)
    den = np.zeros(m)
    for k, r in enumerate(np.conj(diffs)):
        corr += d[k * ts:k * ts + m] * r
        den += e[k * ts:k * ts + m]
    theta = config.energy_gate_ratio * config.amplitude / 2
    gate = np.ones(m, dtype=bool)
    for k in range(p - p // 2, p):
        gate &= np.abs(seg[k * ts:k * ts + m]) > theta
    with np.errstate(invalid="ignore", divide="ignore"):
        norm = np.where(den > 0, np.abs(corr) / np.where(den > 0, den, 1), 0.0)
    return gate, corr, norm


def evaluate_candidate(bb: np.ndarray, bb_base: int, start: int,
                       config: ModemConfig) -> SyncResult:
    """Stages 3 and 4: preamble reference phase and trailer check."""
    correlation = sync_metrics(bb, bb_base, start, start, config)[2][0]
    ts = config.symbol_period_samples
    off = center_offset(config)
    p = config.preamble_symbols
    idx = start + off + ts * np.arange(config.framing_symbols) - bb_base
    vals = bb[idx]
    pre = vals[:p]
    mean = pre.mean()
    ref = float(np.angle(mean))
    n_sync = len(config.sync_pattern)
    trailer = vals[p + n_sync:]
    decided = nearest_index(np.angle(trailer * np.exp(-1j * ref)))
    ok = bool(np.array_equal(decided, np.array(config.trailer_pattern)))
    return SyncResult(int(start), ref, float(abs(mean)), ok, float(correlation))


def timing_halfwidth(config: ModemConfig) -> int:
    return max(2, min(config.transition_samples, config.symbol_period_samples // 2))


def refine_timing(bb: np.ndarray, bb_base: int, best: int, s_lim: int, config: ModemConfig) -> int:
    """Center of the correlation ridge around ``best``.

    Near the optimum the ridge is flat to within the mixer's image residual, so
    a least-squares parabola over a few samples either side locates it more
    reliably than the raw argmax.
    """
    # keep the fit window symmetric when it runs into either buffer edge
    k = min(timing_halfwidth(config), best + center_offset(config) - bb_base, s_lim - best)
    if k < 2:
        return best
    lo, hi = best - k, best + k
    _, corr, _ = sync_metrics(bb, bb_base, lo, hi, config)
    x = np.arange(lo - best, hi - best + 1, dtype=np.float64)
    a, b, _ = np.polyfit(x, np.abs(corr), 2)
    if a >= 0:
        return best
    center = -b / (2 * a)
    if abs(center) > k:
        return best
    return best + int(math.floor(center))


class SyncScanner:
    """Incremental preamble search over a growing baseband buffer.

    ``scan`` only decides candidates whose whole pattern lies inside the
    baseband computed so far, so the sequence of decisions does not depend on
    how the input was chunked.
    """

    def __init__(self, config: ModemConfig, cursor: int = 0):
        self.config = config
        self.cursor = cursor

    def scan(self, bb: np.ndarray, bb_base: int, bb_end: int, final: bool):
        """Return the next accepted SyncResult, or None if more data is needed."""
        cfg = self.config
        ts = cfg.symbol_period_samples
        s_lim = bb_end - 1 - detection_span(cfg)
        while True:
            first = max(self.cursor, bb_base)
            if first > s_lim:
                return None
            s0 = None
            a = first
            while a <= s_lim:
                b = min(a + SCAN_CHUNK - 1, s_lim)
                gate, _, norm = sync_metrics(bb, bb_base, a, b, cfg)
                hits = np.flatnonzero(gate & (norm >= cfg.sync_threshold))
                if len(hits):
                    s0 = a + int(hits[0])
                    break
                a = b + 1
            if s0 is None:
                self.cursor = s_lim + 1
                return None
            if s0 + ts + timing_halfwidth(cfg) > s_lim and not final:
                self.cursor = s0
                return None
            hi = min(s0 + ts, s_lim)
            gate, corr, norm = sync_metrics(bb, bb_base, s0, hi, cfg)
            score = np.where(gate & (norm >= cfg.sync_threshold), np.abs(corr), -1.0)
            j = int(np.argmax(score))
            best = refine_timing(bb, bb_base, s0 + j, s_lim, cfg)
            result = evaluate_candidate(bb, bb_base, best, cfg)
            self.cursor = max(s0 + 1, best + timing_halfwidth(cfg) + 1)
            if result.accepted:
                return result


def detect_preamble(bb: BasebandSequence, config: ModemConfig, start: int = 0) -> SyncResult | None:
    """First accepted frame at or after absolute sample ``start``; None if absent."""
    scanner = SyncScanner(config, cursor=start)
    return scanner.scan(bb.samples, bb.offset, bb.end, final=True)


def sample_symbols(bb: BasebandSequence, sync: SyncResult, count: int, config: ModemConfig,
                   first_slot: int = 0) -> list[SoftSymbol]:
    """Soft symbols for slots ``first_slot .. first_slot+count-1`` of a frame.

    Each value is the baseband at the slot's steady-segment center, rotated by
    the preamble reference phase.
    """
    if count <= 0:
        return []
    slots = np.arange(first_slot, first_slot + count)
    idx = sync.frame_start_sample + slots * config.symbol_period_samples + center_offset(config)
    if idx[0] < bb.offset or idx[-1] >= bb.end:
        raise BufferTooShort(f"slots up to {slots[-1]} overrun the baseband buffer")
    vals = bb.samples[idx - bb.offset] * np.exp(-1j * sync.reference_phase_rad)
    return [SoftSymbol(complex(v), int(k)) for v, k in zip(vals, slots)]
