import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from batnet.channel_sim import IDENTITY, ChannelProfile
from batnet.demodulator import SoftSymbol
from batnet.errors import LengthMismatch, UnknownAxis
from batnet.evaluation import (
    SCALAR_COLUMNS, QualityReport, calibrate, channel_probe, mean_quality_by_value, resolve_axis,
    run_sweep, run_trial, transmission_quality, value_range,
)
from batnet.modem_core import PHASE_STEP, ModemConfig

from oracles import quality_oracle

CFG = ModemConfig()
PEAK = ChannelProfile(rx_response=((20000, 0.05), (21000, 0.05), (21500, 1), (22000, 0.05),
                                   (24000, 0.05)), snr_db=10)


def softs_for(indices, rotation=0.0):
    return [SoftSymbol(0.25 * np.exp(1j * (PHASE_STEP * k + rotation)), i)
            for i, k in enumerate(indices)]


# -- metric ----------------------------------------------------------------------

def test_all_correct():
    sent = list(range(8)) + [0, 1]
    r = transmission_quality(sent, softs_for(sent), np.zeros(10))
    assert r.quality == 1.0 and r.symbols_correct == 10


def test_one_adjacent():
    sent = [3] * 10
    got = [3] * 9 + [4]
    r = transmission_quality(sent, softs_for(got), np.zeros(10))
    assert r.quality == pytest.approx(0.95)
    assert (r.symbols_correct, r.symbols_adjacent) == (9, 1)


def test_one_opposite():
    sent = [3] * 10
    got = [3] * 9 + [7]
    assert transmission_quality(sent, softs_for(got), np.zeros(10)).quality == pytest.approx(0.9)


def test_wraparound_counts_as_adjacent():
    assert transmission_quality([0], softs_for([7]), [0.0]).symbols_adjacent == 1


def test_phase_track_is_applied():
    sent = [1, 2, 3]
    r = transmission_quality(sent, softs_for(sent, 0.6), [0.6] * 3)
    assert r.quality == 1.0


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        transmission_quality([0, 1], softs_for([0]), [0.0])
    with pytest.raises(LengthMismatch):
        transmission_quality([0], softs_for([0]), [0.0, 0.0])


def test_metric_matches_oracle():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        n = int(rng.integers(1, 30))
        sent = rng.integers(0, 8, n)
        values = rng.normal(size=n) + 1j * rng.normal(size=n)
        phases = rng.uniform(-1, 1, n)
        got = transmission_quality(sent, values, phases).quality
        assert got == pytest.approx(quality_oracle(sent, values, phases), abs=1e-12)


@settings(max_examples=100)
@given(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), min_size=1, max_size=40))
def test_quality_bounds(pairs):
    sent, got = zip(*pairs)
    r = transmission_quality(sent, softs_for(got), np.zeros(len(got)))
    assert 0.0 <= r.quality <= 1.0
    assert (r.quality == 1.0) == (sent == got)
    assert r.quality == pytest.approx((r.symbols_correct + 0.5 * r.symbols_adjacent) / r.symbols_total)


# -- trials and sweeps -----------------------------------------------------------

def test_identity_trial():
    r = run_trial(CFG, IDENTITY, seed=5)
    assert r.quality == 1.0 and r.payload_ok and r.sync_found
    assert r.bit_errors == 0 and r.blocks_failed == 0
    assert r.symbols_total == 7 * 33
    assert r.profile_snapshot.rng_seed == 5


def test_missed_sync_scores_zero():
    r = run_trial(CFG, ChannelProfile(distance_m=50, snr_db=-20), seed=1)
    assert not r.sync_found
    assert r.quality == 0.0 and not r.payload_ok
    assert r.bit_errors == 8 * 64


def test_identity_sweep_trials_one():
    reports = run_sweep(CFG, IDENTITY, "carrier_freq_hz", [20000, 22500, 23500], trials=1)
    assert [r.quality for r in reports] == [1.0, 1.0, 1.0]
    assert [r.axis_value for r in reports] == [20000, 22500, 23500]


def test_sweep_order_and_seeds():
    reports = run_sweep(CFG, IDENTITY, "distance", [1, 2], trials=3, seed0=10)
    assert [(r.axis_value, r.seed) for r in reports] == [
        (1, 10), (1, 11), (1, 12), (2, 10), (2, 11), (2, 12)]
    assert reports[3].profile_snapshot.distance_m == 2


def test_symbol_len_axis_sets_integer():
    r = run_sweep(CFG, IDENTITY, "symbol-len", [96], trials=1)[0]
    assert r.config_snapshot.symbol_period_samples == 96
    assert isinstance(r.config_snapshot.symbol_period_samples, int)


def test_reproducible():
    prof = ChannelProfile(distance_m=3, snr_db=12)
    a = run_sweep(CFG, prof, "snr", [5, 12], trials=2, seed0=3)
    b = run_sweep(CFG, prof, "snr", [5, 12], trials=2, seed0=3)
    assert [x.scalars() for x in a] == [x.scalars() for x in b]


def test_parallel_matches_serial():
    prof = ChannelProfile(snr_db=8)
    a = run_sweep(CFG, prof, "distance", [1, 2], trials=2, workers=1)
    b = run_sweep(CFG, prof, "distance", [1, 2], trials=2, workers=2)
    assert [x.scalars() for x in a] == [x.scalars() for x in b]


def test_drift_off_flag_reaches_decoder():
    prof = ChannelProfile(relative_velocity_mps=0.0097)
    tracked = run_trial(CFG, prof, seed=0)
    untracked = run_trial(CFG, prof, seed=0, track_phase=False)
    assert tracked.payload_ok and not untracked.payload_ok


def test_unknown_axis():
    with pytest.raises(UnknownAxis):
        resolve_axis("colour")
    with pytest.raises(UnknownAxis):
        run_sweep(CFG, IDENTITY, "amplitude", [0.5])


def test_csv_rows():
    from batnet.evaluation import write_csv
    reports = run_sweep(CFG, IDENTITY, "distance", [1, 2], trials=2)
    buf = io.StringIO()
    write_csv(reports, buf, "distance_m")
    lines = buf.getvalue().strip().splitlines()
    assert lines[0].split(",") == ["distance_m"] + SCALAR_COLUMNS
    assert len(lines) == 5
    assert mean_quality_by_value(reports) == {1.0: 1.0, 2.0: 1.0}


def test_report_scalars_skip_snapshots():
    r = QualityReport(1.0, 7, 7, 0)
    assert set(r.scalars()) == set(SCALAR_COLUMNS)


# -- calibration -----------------------------------------------------------------

def test_calibrate_ties_go_low():
    cal = calibrate(channel_probe(CFG, IDENTITY))
    assert cal.best_freq_hz == 20000
    assert set(cal.mean_quality.values()) == {1.0}
    assert not cal.all_failed


def test_calibrate_avoids_jammed_carrier():
    cal = calibrate(channel_probe(CFG, ChannelProfile(jammer=(22500, 0.5))))
    assert cal.best_freq_hz != 22500
    assert cal.mean_quality[22500] == min(cal.mean_quality.values())


def test_calibrate_finds_response_peak():
    assert calibrate(channel_probe(CFG, PEAK)).best_freq_hz == 21500


def test_calibrate_all_failed_is_flagged():
    def dead(freq, trial):
        return QualityReport(0.0, 7, 0, 0, sync_found=False)
    cal = calibrate(dead, [21000, 20000])
    assert cal.all_failed and cal.best_freq_hz == 20000


def test_calibrate_uses_probe_trials():
    seen = []

    def probe(freq, trial):
        seen.append((freq, trial))
        return QualityReport(1.0 if freq == 21000 and trial == 3 else 0.5, 7, 7, 0)
    assert calibrate(probe, [20000, 21000]).best_freq_hz == 21000
    assert len(seen) == 8


# -- value ranges ----------------------------------------------------------------

def test_value_range():
    assert value_range("1:8:1") == [1, 2, 3, 4, 5, 6, 7, 8]
    assert value_range("0:30:5") == [0, 5, 10, 15, 20, 25, 30]
    assert value_range("64, 96,160") == [64, 96, 160]
    assert value_range("0:1:0.1")[-1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        value_range("1:2:0")
    assert math.isclose(len(value_range("20000:23500:500")), 8)
