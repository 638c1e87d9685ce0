"""Parametric acoustic channel: Doppler/clock resampling, distance and
orientation gains, device responses, a jammer tone and calibrated noise."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidProfile
from .kvfile import coerce, format_pairs, parse_number, parse_pairs, read_kv
from .modulator import PcmBuffer

INBAND_HALFWIDTH_HZ = 2000.0


def cardioid_gain(angle_deg: float) -> float:
    """Default angular gain: 1 on axis, 0.25 directly behind."""
    a = math.radians(abs(angle_deg) % 360)
    return 0.25 + 0.75 * (1 + math.cos(a)) / 2


@dataclass(frozen=True)
class ChannelProfile:
    distance_m: float = 1.0
    tx_angle_deg: float = 0.0
    rx_angle_deg: float = 0.0
    snr_db: float = math.inf
    relative_velocity_mps: float = 0.0  # positive = receding
    clock_skew_ppm: float = 0.0
    tx_response: tuple = ()  # (frequency_hz, gain) pairs; empty = flat
    rx_response: tuple = ()
    angular_gain: tuple = ()  # (angle_deg, gain) pairs; empty = cardioid
    jammer: tuple | None = None  # (freq_hz, amplitude)
    speed_of_sound_mps: float = 343.0
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("tx_response", "rx_response", "angular_gain"):
            object.__setattr__(self, name, tuple(tuple(map(float, p)) for p in getattr(self, name)))
        if self.jammer is not None:
            object.__setattr__(self, "jammer", tuple(map(float, self.jammer)))
        self.validate()

    def validate(self):
        if not self.distance_m >= 0.1:
            raise InvalidProfile("distance_m must be >= 0.1")
        if math.isnan(self.snr_db):
            raise InvalidProfile("snr_db is NaN")
        if not self.speed_of_sound_mps > 0:
            raise InvalidProfile("speed_of_sound_mps must be positive")
        if not 0.9 <= self.resample_ratio <= 1.1:
            raise InvalidProfile("velocity and clock skew give a resampling ratio outside [0.9, 1.1]")
        for name in ("tx_response", "rx_response"):
            curve = getattr(self, name)
            if any(not 0 <= g <= 1 for _, g in curve):
                raise InvalidProfile(f"{name} gains must lie in [0, 1]")
            if list(curve) != sorted(curve):
                raise InvalidProfile(f"{name} frequencies must be increasing")
        if self.angular_gain:
            angles = [a for a, _ in self.angular_gain]
            gains = [g for _, g in self.angular_gain]
            if angles != sorted(angles) or angles[0] != 0 or angles[-1] < 180:
                raise InvalidProfile("angular_gain must cover 0..180 degrees in increasing order")
            if any(not 0 <= g <= 1 for g in gains):
                raise InvalidProfile("angular gains must lie in [0, 1]")
            if any(b > a for a, b in zip(gains, gains[1:])):
                raise InvalidProfile("angular gain must be non-increasing away from 0 degrees")
        if self.jammer is not None:
            if len(self.jammer) != 2 or self.jammer[0] <= 0 or self.jammer[1] < 0:
                raise InvalidProfile("jammer is (freq_hz > 0, amplitude >= 0)")

    @property
    def resample_ratio(self) -> float:
        return 1 + self.clock_skew_ppm * 1e-6 - self.relative_velocity_mps / self.speed_of_sound_mps

    def attenuation(self) -> float:
        return min(1.0, 1.0 / self.distance_m)

    def angle_gain(self, angle_deg: float) -> float:
        if not self.angular_gain:
            return cardioid_gain(angle_deg)
        a = abs(angle_deg) % 360
        a = 360 - a if a > 180 else a
        xs, ys = zip(*self.angular_gain)
        return float(np.interp(a, xs, ys))

    def response_gain(self, freq_hz: float) -> float:
        g = 1.0
        for curve in (self.tx_response, self.rx_response):
            if curve:
                xs, ys = zip(*curve)
                g *= float(np.interp(freq_hz, xs, ys))
        return g

    def total_gain(self, freq_hz: float) -> float:
        return (self.attenuation() * self.response_gain(freq_hz)
                * self.angle_gain(self.tx_angle_deg) * self.angle_gain(self.rx_angle_deg))

    def replace(self, **changes) -> "ChannelProfile":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


IDENTITY = ChannelProfile()


def velocity_for_drift(drift_rad_s: float, carrier_hz: float, speed_of_sound: float = 343.0) -> float:
    """Receding speed that makes the received carrier phase slide by ``drift_rad_s``."""
    return drift_rad_s * speed_of_sound / (2 * math.pi * carrier_hz)


# -- resampling ----------------------------------------------------------------

def _kaiser(x: np.ndarray, beta: float) -> np.ndarray:
    inside = np.abs(x) <= 1
    arg = np.sqrt(np.clip(1 - x * x, 0, None))
    return np.where(inside, np.i0(beta * arg) / np.i0(beta), 0.0)


def _filter_bank(cutoff: float, half_taps: int, beta: float, oversample: int) -> np.ndarray:
    """Row ``p`` holds the tap weights for a fractional delay of ``p / oversample``."""
    frac = np.arange(oversample + 1)[:, None] / oversample
    d = frac - np.arange(-half_taps + 1, half_taps + 1)[None, :]
    return 2 * cutoff * np.sinc(2 * cutoff * d) * _kaiser(d / half_taps, beta)


def resample(pcm: PcmBuffer, ratio: float, half_taps: int = 128, beta: float = 8.6,
             chunk: int = 4096, oversample: int = 512) -> PcmBuffer:
    """Windowed-sinc interpolation: ``out[n] = x(n * ratio)``.

    ``ratio > 1`` reads the input faster (fewer output samples, every
    frequency scaled up by ``ratio``); the kernel cutoff drops accordingly so
    nothing aliases. The kernel is tabulated at ``oversample`` fractional
    delays and the two nearest outputs are linearly interpolated.
    """
    if not 0.9 <= ratio <= 1.1:
        raise ValueError(f"ratio {ratio} outside [0.9, 1.1]")
    x = pcm.samples
    n_out = int(math.floor(len(x) / ratio))
    if ratio == 1.0:
        return PcmBuffer(x.copy(), pcm.sample_rate_hz)
    bank = _filter_bank(0.5 * min(1.0, 1.0 / ratio), half_taps, beta, oversample)
    padded = np.concatenate((np.zeros(half_taps), x, np.zeros(half_taps + 1)))
    windows = sliding_window_view(padded, 2 * half_taps)
    out = np.empty(n_out)
    for a in range(0, n_out, chunk):
        t = np.arange(a, min(a + chunk, n_out)) * ratio
        k0 = np.floor(t).astype(np.int64)
        pos = (t - k0) * oversample
        j = np.minimum(np.floor(pos).astype(np.int64), oversample - 1)
        taps = windows[k0 + 1]
        lo = np.einsum("ij,ij->i", bank[j], taps)
        hi = np.einsum("ij,ij->i", bank[j + 1], taps)
        out[a:a + len(t)] = lo + (pos - j) * (hi - lo)
    return PcmBuffer(out, pcm.sample_rate_hz)


# -- noise calibration ---------------------------------------------------------

def _band(carrier_hz: float, fs: float) -> tuple[float, float]:
    return max(carrier_hz - INBAND_HALFWIDTH_HZ, 0.0), min(carrier_hz + INBAND_HALFWIDTH_HZ, fs / 2)


def active_region(x: np.ndarray) -> np.ndarray:
    """Strip exact leading/trailing zeros (silence padding)."""
    nz = np.flatnonzero(x)
    return x[nz[0]:nz[-1] + 1] if len(nz) else x[:0]


def inband_power(x: np.ndarray, carrier_hz: float, fs: float) -> float:
    """Mean power of ``x`` falling within ``carrier +/- 2 kHz``."""
    n = len(x)
    if n == 0:
        return 0.0
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, 1 / fs)
    lo, hi = _band(carrier_hz, fs)
    weight = np.full(len(freqs), 2.0)
    weight[0] = 1.0
    if n % 2 == 0:
        weight[-1] = 1.0
    sel = (freqs >= lo) & (freqs <= hi)
    return float(np.sum(weight[sel] * np.abs(spec[sel]) ** 2) / n ** 2)


def noise_sigma(reference_power: float, snr_db: float, carrier_hz: float, fs: float) -> float:
    """Std-dev of white noise whose in-band power is ``snr_db`` below the reference."""
    lo, hi = _band(carrier_hz, fs)
    band_fraction = (hi - lo) / (fs / 2)
    return math.sqrt(reference_power / 10 ** (snr_db / 10) / band_fraction)


def apply_channel(pcm: PcmBuffer, profile: ChannelProfile, carrier_hint_hz: float) -> PcmBuffer:
    """Pass ``pcm`` through the channel.

    The noise level is set against the in-band power of the *transmitted*
    signal, so distance, orientation and device responses lower the
    effective SNR the way they would in the field.
    """
    if len(pcm) == 0:
        raise ValueError("empty PCM buffer")
    fs = pcm.sample_rate_hz
    rng = np.random.default_rng(profile.rng_seed)
    ratio = profile.resample_ratio
    y = resample(pcm, ratio).samples if ratio != 1.0 else pcm.samples.copy()
    gain = profile.total_gain(carrier_hint_hz)
    if gain != 1.0:
        y = y * gain
    if profile.jammer is not None:
        freq, amp = profile.jammer
        phase0 = rng.uniform(0, 2 * math.pi)
        y = y + amp * np.cos(2 * math.pi * freq / fs * np.arange(len(y)) + phase0)
    if math.isfinite(profile.snr_db):
        ref = inband_power(active_region(pcm.samples), carrier_hint_hz, fs)
        sigma = noise_sigma(ref, profile.snr_db, carrier_hint_hz, fs)
        y = y + rng.normal(0.0, sigma, len(y))
    return PcmBuffer(y, fs)


# -- profile files -------------------------------------------------------------

def _parse_jammer(text: str):
    t = text.strip()
    if not t or t.lower() == "none":
        return None
    freq, amp = (parse_number(v) for v in t.split(","))
    return (freq, amp)


_CONVERTERS = {
    "distance_m": parse_number,
    "tx_angle_deg": parse_number,
    "rx_angle_deg": parse_number,
    "snr_db": parse_number,
    "relative_velocity_mps": parse_number,
    "clock_skew_ppm": parse_number,
    "tx_response": parse_pairs,
    "rx_response": parse_pairs,
    "angular_gain": parse_pairs,
    "jammer": _parse_jammer,
    "speed_of_sound_mps": parse_number,
    "rng_seed": lambda v: int(v, 0),
}


def profile_from_dict(raw: dict[str, str], base: ChannelProfile = IDENTITY) -> ChannelProfile:
    try:
        changes = coerce(ChannelProfile, raw, _CONVERTERS)
    except KeyError as exc:
        raise InvalidProfile(str(exc)) from None
    except ValueError as exc:
        raise InvalidProfile(f"bad profile value: {exc}") from None
    return replace(base, **changes)


def load_profile(path, base: ChannelProfile = IDENTITY) -> ChannelProfile:
    return profile_from_dict(read_kv(path), base)


def dump_profile(profile: ChannelProfile) -> str:
    lines = []
    for key, value in profile.to_dict().items():
        if key in ("tx_response", "rx_response", "angular_gain"):
            text = format_pairs(value)
        elif key == "jammer":
            text = "none" if value is None else f"{value[0]:g}, {value[1]:g}"
        else:
            text = f"{value:g}" if isinstance(value, float) else str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
