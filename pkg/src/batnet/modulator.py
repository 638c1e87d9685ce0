"""Continuous-phase 8-PSK waveform synthesis.

Each symbol period is a steady carrier segment followed by a constant-frequency
transition segment whose frequency offset carries the phase over to the next
symbol, so the rendered waveform has no phase discontinuities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid
from .modem_core import CONSTELLATION_SIZE, PHASE_STEP, Frame, ModemConfig


@dataclass(frozen=True)
class PcmBuffer:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("PCM must be mono")
        if not np.all(np.isfinite(samples)):
            raise ValueError("PCM samples must be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def wrap_step(delta_index: int) -> int:
    """Shortest signed step between constellation points, in (-4, 4]."""
    d = delta_index % CONSTELLATION_SIZE
    return d - CONSTELLATION_SIZE if d > CONSTELLATION_SIZE // 2 else d


def _transition_freq(step: int, config: ModemConfig) -> float:
    return config.carrier_freq_hz + step * PHASE_STEP * config.sample_rate_hz / (
        2 * math.pi * config.transition_samples)


def transition_step(delta_index: int, config: ModemConfig) -> int:
    """Phase advance (in constellation steps) used to reach the next symbol.

    The shortest path is preferred, with a half-turn taken forwards. If that
    would push the transition tone to or past Nyquist, the transition goes the
    other way round the circle instead.
    """
    step = wrap_step(delta_index)
    nyquist = config.sample_rate_hz / 2
    if 0 < _transition_freq(step, config) < nyquist:
        return step
    alt = step - CONSTELLATION_SIZE if step > 0 else step + CONSTELLATION_SIZE
    if 0 < _transition_freq(alt, config) < nyquist:
        return alt
    raise ConfigInvalid(
        f"no transition tone below Nyquist for a step of {step} at "
        f"{config.carrier_freq_hz} Hz with {config.transition_samples} transition samples")


def check_transition_band(config: ModemConfig) -> None:
    for d in range(CONSTELLATION_SIZE):
        transition_step(d, config)


def _symbol_steps(symbols: np.ndarray, config: ModemConfig) -> np.ndarray:
    deltas = np.diff(symbols, append=symbols[-1:])
    return np.array([transition_step(int(d), config) for d in deltas], dtype=np.int64)


def excess_phase(symbols, config: ModemConfig) -> np.ndarray:
    """Per-sample phase over the carrier reference, unwrapped."""
    symbols = np.asarray(symbols, dtype=np.int64)
    if len(symbols) == 0:
        return np.zeros(0)
    ts, tt = config.symbol_period_samples, config.transition_samples
    steady = ts - tt
    steps = _symbol_steps(symbols, config)
    start = PHASE_STEP * symbols[0] + PHASE_STEP * np.concatenate(([0], np.cumsum(steps[:-1])))
    ramp = np.zeros(ts)
    ramp[steady:] = np.arange(tt) / tt
    phase = start[:, None] + PHASE_STEP * steps[:, None] * ramp[None, :]
    return phase.reshape(-1)


def phase_schedule(frame: Frame | np.ndarray, config: ModemConfig) -> np.ndarray:
    """Instantaneous phase of every output sample, in radians (unwrapped)."""
    symbols = frame.symbol_sequence if isinstance(frame, Frame) else np.asarray(frame)
    check_transition_band(config)
    excess = excess_phase(symbols, config)
    n = np.arange(len(excess))
    return 2 * math.pi * config.carrier_freq_hz / config.sample_rate_hz * n + excess


def modulate(frame: Frame | np.ndarray, config: ModemConfig) -> PcmBuffer:
    phase = phase_schedule(frame, config)
    return PcmBuffer(config.amplitude * np.cos(phase), config.sample_rate_hz)


def max_transition_freq(config: ModemConfig) -> float:
    """Highest instantaneous frequency the modulator can emit for ``config``."""
    freqs = [_transition_freq(transition_step(d, config), config) for d in range(CONSTELLATION_SIZE)]
    return max(freqs + [config.carrier_freq_hz])


def silence(n_samples: int, config: ModemConfig) -> PcmBuffer:
    return PcmBuffer(np.zeros(n_samples), config.sample_rate_hz)


def concat(*buffers: PcmBuffer) -> PcmBuffer:
    rates = {b.sample_rate_hz for b in buffers}
    if len(rates) != 1:
        raise ValueError("cannot concatenate buffers with different sample rates")
    return PcmBuffer(np.concatenate([b.samples for b in buffers]), rates.pop())
