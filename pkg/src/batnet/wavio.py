"""Mono 16-bit PCM WAV reading and writing."""
from __future__ import annotations

import io
import sys
import wave

import numpy as np

from .modulator import PcmBuffer

FULL_SCALE = 32768


def to_int16(samples: np.ndarray) -> np.ndarray:
    """Scale by 32768, round half away from zero, clamp to the int16 range."""
    x = np.asarray(samples, dtype=np.float64) * FULL_SCALE
    rounded = np.sign(x) * np.floor(np.abs(x) + 0.5)
    return np.clip(rounded, -FULL_SCALE, FULL_SCALE - 1).astype("<i2")


def wav_bytes(pcm: PcmBuffer) -> bytes:
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(pcm.sample_rate_hz)
        w.writeframes(to_int16(pcm.samples).tobytes())
    return buf.getvalue()


def parse_wav(data: bytes) -> PcmBuffer:
    with wave.open(io.BytesIO(data), "rb") as w:
        if w.getnchannels() != 1:
            raise ValueError(f"expected mono WAV, got {w.getnchannels()} channels")
        if w.getsampwidth() != 2:
            raise ValueError(f"expected 16-bit samples, got {8 * w.getsampwidth()}-bit")
        rate = w.getframerate()
        raw = w.readframes(w.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / FULL_SCALE
    return PcmBuffer(samples, rate)


def write_wav(path, pcm: PcmBuffer) -> None:
    """Write ``pcm`` to ``path``; ``"-"`` means standard output."""
    data = wav_bytes(pcm)
    if str(path) == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        with open(path, "wb") as fh:
            fh.write(data)


def read_wav(path) -> PcmBuffer:
    """Read a WAV from ``path``; ``"-"`` means standard input."""
    if str(path) == "-":
        return parse_wav(sys.stdin.buffer.read())
    with open(path, "rb") as fh:
        return parse_wav(fh.read())
