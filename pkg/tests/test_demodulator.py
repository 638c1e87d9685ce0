import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from batnet.errors import BufferTooShort
from batnet.modem_core import PHASE_STEP, ModemConfig, build_frame
from batnet.modulator import PcmBuffer, modulate
from batnet.demodulator import (
    detect_preamble, mix_to_baseband, nearest_index, sample_symbols, window_length,
)

CFG = ModemConfig()
FS = 48000


def tone(freq, phase=0.0, amp=1.0, n=4800):
    t = np.arange(n)
    return PcmBuffer(amp * np.cos(2 * np.pi * freq / FS * t + phase), FS)


def embed(payload, offset, cfg=CFG, tail=500):
    x = modulate(build_frame(payload, cfg), cfg).samples
    return PcmBuffer(np.concatenate((np.zeros(offset), x, np.zeros(tail))), FS)


def detect(pcm, cfg=CFG):
    return detect_preamble(mix_to_baseband(pcm, cfg), cfg)


# -- mixing --------------------------------------------------------------------

@pytest.mark.parametrize("phase", [0.0, math.pi / 2, -2.0])
def test_pure_carrier_baseband(phase):
    bb = mix_to_baseband(tone(22500, phase), CFG).samples
    w = window_length(CFG)
    inner = bb[w:-w]
    np.testing.assert_allclose(inner, 0.5 * np.exp(1j * phase), atol=0.01)


def test_offset_carrier_rotates():
    bb = mix_to_baseband(tone(22550), CFG).samples
    w = window_length(CFG)
    phase = np.unwrap(np.angle(bb[w:-w]))
    # the sum-frequency image is not nulled off-carrier, so fit rather than difference
    slope = np.polyfit(np.arange(len(phase)), phase, 1)[0]
    assert slope == pytest.approx(2 * np.pi * 50 / FS, rel=1e-3)


def test_baseband_same_length_and_bounded():
    pcm = embed(b"bounded magnitudes", 1000)
    bb = mix_to_baseband(pcm, CFG)
    assert len(bb) == len(pcm)
    assert np.max(np.abs(bb.samples)) <= CFG.amplitude / 2 + 0.05


def test_short_buffer_rejected():
    with pytest.raises(BufferTooShort):
        mix_to_baseband(PcmBuffer(np.zeros(window_length(CFG) - 1), FS), CFG)


def test_nearest_index_ties_go_low():
    assert nearest_index(math.pi / 8) == 0
    assert nearest_index(3 * math.pi / 8) == 1
    assert nearest_index(-math.pi / 8) == 7
    assert nearest_index(math.pi) == 4


# -- detection -----------------------------------------------------------------

def test_detect_at_known_offset():
    sync = detect(embed(b"Hello, world!", 4321))
    assert sync is not None and sync.accepted
    assert abs(sync.frame_start_sample - 4321) <= 2
    # the mixer runs on absolute time, so the frame's carrier appears rotated
    true_ref = np.angle(np.exp(-1j * 2 * np.pi * 22500 / FS * 4321))
    assert abs(np.angle(np.exp(1j * (sync.reference_phase_rad - true_ref)))) < 0.05


def test_noise_gives_no_sync():
    rng = np.random.default_rng(0)
    sigma = 10 ** (-10 / 20)
    for _ in range(3):
        assert detect(PcmBuffer(np.clip(rng.normal(0, sigma, 2 * FS), -1, 1), FS)) is None


def test_silence_gives_no_sync():
    assert detect(PcmBuffer(np.zeros(FS), FS)) is None


def test_corrupted_trailer_rejected():
    frame = build_frame(b"trailer test", CFG)
    symbols = frame.symbol_sequence.copy()
    symbols[40:44] = [2, 6, 2, 6]
    x = np.concatenate((np.zeros(3000), modulate(symbols, CFG).samples, np.zeros(500)))
    assert detect(PcmBuffer(x, FS)) is None


@settings(max_examples=25)
@given(st.integers(0, 4000), st.sampled_from([20000.0, 22500.0, 23500.0]))
def test_shift_equivariance(n, fc):
    cfg = CFG.replace(carrier_freq_hz=fc)
    base = embed(b"shift me", 700, cfg)
    shifted = PcmBuffer(np.concatenate((np.zeros(n), base.samples)), FS)
    a, b = detect(base, cfg), detect(shifted, cfg)
    assert b.frame_start_sample - a.frame_start_sample == n


@settings(max_examples=25)
@given(st.floats(0.05, 1.0), st.binary(max_size=24))
def test_amplitude_invariance(c, payload):
    pcm = embed(payload, 1500)
    scaled = PcmBuffer(pcm.samples * c, FS)
    a, b = detect(pcm), detect(scaled)
    assert (a is None) == (b is None)
    assert abs(a.frame_start_sample - b.frame_start_sample) <= 1
    n = len(build_frame(payload, CFG).block_symbols)
    sa = sample_symbols(mix_to_baseband(pcm, CFG), a, n, CFG, CFG.framing_symbols)
    sb = sample_symbols(mix_to_baseband(scaled, CFG), b, n, CFG, CFG.framing_symbols)
    da = nearest_index(np.angle([s.value for s in sa]))
    db = nearest_index(np.angle([s.value for s in sb]))
    assert np.array_equal(da, db)


# -- symbol sampling -----------------------------------------------------------

def test_loopback_soft_symbols_close_to_constellation():
    frame = build_frame(b"soft symbols", CFG)
    pcm = embed(b"soft symbols", 2000)
    bb = mix_to_baseband(pcm, CFG)
    sync = detect_preamble(bb, CFG)
    softs = sample_symbols(bb, sync, len(frame.symbol_sequence), CFG)
    err = np.angle(np.array([s.value for s in softs]) * np.exp(-1j * PHASE_STEP * frame.symbol_sequence))
    assert np.max(np.abs(err)) < 0.15
    assert [s.slot_index for s in softs] == list(range(len(softs)))


def test_sample_zero_count():
    pcm = embed(b"", 1000)
    bb = mix_to_baseband(pcm, CFG)
    assert sample_symbols(bb, detect_preamble(bb, CFG), 0, CFG) == []


def test_all_zero_data_symbols():
    head = build_frame(b"", CFG).symbol_sequence[:CFG.framing_symbols]
    symbols = np.concatenate((head, np.zeros(21, dtype=np.int64)))
    x = np.concatenate((np.zeros(1000), modulate(symbols, CFG).samples, np.zeros(500)))
    bb = mix_to_baseband(PcmBuffer(x, FS), CFG)
    sync = detect_preamble(bb, CFG)
    softs = sample_symbols(bb, sync, 21, CFG, CFG.framing_symbols)
    np.testing.assert_allclose([s.value for s in softs], 0.5 * CFG.amplitude, atol=0.01)


def test_sample_overrun():
    pcm = embed(b"abc", 1000, tail=0)
    bb = mix_to_baseband(pcm, CFG)
    sync = detect_preamble(bb, CFG)
    with pytest.raises(BufferTooShort):
        sample_symbols(bb, sync, 1000, CFG)
