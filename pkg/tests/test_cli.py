import os
import subprocess
import sys

import numpy as np
import pytest

from batnet.cli import main
from batnet.modulator import PcmBuffer
from batnet.wavio import read_wav, write_wav

PEAK_PROFILE = """\
# a receiver that only hears well around 21.5 kHz
rx_response = 20000:0.05, 21000:0.05, 21500:1, 22000:0.05, 24000:0.05
snr_db = 10
"""


def run(*args, stdin=None, env=None):
    return subprocess.run([sys.executable, "-m", "batnet", *args], input=stdin,
                          capture_output=True, env=env)


def test_encode_reports_rates(tmp_path, capsys):
    out = tmp_path / "hello.wav"
    assert main(["encode", "--text", "Hello, world!", "--freq", "22500", "--symbol-len", "160",
                 "--out", str(out)]) == 0
    err = capsys.readouterr().err
    assert "symbols: 100" in err
    assert "raw rate: 900.0 bit/s" in err
    assert "effective rate: 685.71 bit/s" in err
    pcm = read_wav(out)
    assert len(pcm) == 16000 and pcm.sample_rate_hz == 48000


def test_encode_empty(tmp_path):
    out = tmp_path / "empty.wav"
    assert main(["encode", "--text", "", "--out", str(out)]) == 0
    assert len(read_wav(out)) == 51 * 160


def test_encode_oversize(tmp_path):
    big = tmp_path / "big.bin"
    big.write_bytes(bytes(8193))
    assert main(["encode", "--file", str(big), "--out", str(tmp_path / "x.wav")]) == 1


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["encode", "--out", str(tmp_path / "x.wav")])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["encode", "--text", "x", "--freq", "30000", "--out", str(tmp_path / "x.wav")])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_decode_loopback(tmp_path, capsysbinary):
    wav = tmp_path / "hello.wav"
    main(["encode", "--text", "Hello, world!", "--out", str(wav)])
    capsysbinary.readouterr()
    truth = tmp_path / "truth.txt"
    truth.write_bytes(b"Hello, world!")
    assert main(["decode", "--in", str(wav), "--truth", str(truth)]) == 0
    cap = capsysbinary.readouterr()
    assert cap.out == b"Hello, world!"
    assert b"sync offset: 0" in cap.err
    assert b"quality: 1.0000" in cap.err


def test_decode_silence(tmp_path, capsys):
    wav = tmp_path / "silence.wav"
    write_wav(wav, PcmBuffer(np.zeros(48000), 48000))
    assert main(["decode", "--in", str(wav)]) == 1
    assert "no sync" in capsys.readouterr().err


def test_decode_after_simulated_channel(tmp_path, capsysbinary):
    tx, rx = tmp_path / "tx.wav", tmp_path / "rx.wav"
    payload = bytes(range(40))
    (tmp_path / "p.bin").write_bytes(payload)
    main(["encode", "--file", str(tmp_path / "p.bin"), "--out", str(tx)])
    pad = np.concatenate((np.zeros(2000), read_wav(tx).samples, np.zeros(2000)))
    write_wav(tx, PcmBuffer(pad, 48000))
    assert main(["simulate", "--in", str(tx), "--out", str(rx), "--snr", "25",
                 "--velocity", "0.005", "--seed", "3"]) == 0
    capsysbinary.readouterr()
    assert main(["decode", "--in", str(rx)]) == 0
    assert capsysbinary.readouterr().out == payload


def test_simulate_is_reproducible(tmp_path):
    tx = tmp_path / "tx.wav"
    main(["encode", "--text", "same every time", "--out", str(tx)])
    outs = []
    for name in ("a.wav", "b.wav"):
        assert main(["simulate", "--in", str(tx), "--out", str(tmp_path / name),
                     "--distance", "3", "--snr", "20", "--seed", "7"]) == 0
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]
    main(["simulate", "--in", str(tx), "--out", str(tmp_path / "c.wav"),
          "--distance", "3", "--snr", "20", "--seed", "8"])
    assert (tmp_path / "c.wav").read_bytes() != outs[0]


def test_evaluate_distance_csv(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    assert main(["evaluate", "--axis", "distance", "--values", "1:8:1", "--trials", "16",
                 "--out", str(out), "--workers", "2"]) == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 1 + 128
    assert lines[0].startswith("distance_m,quality,")
    assert "distance_m=8: mean quality" in capsys.readouterr().err


def test_evaluate_bad_axis():
    with pytest.raises(SystemExit) as exc:
        main(["evaluate", "--axis", "colour", "--values", "1,2"])
    assert exc.value.code == 2


def test_bad_profile_key(tmp_path):
    prof = tmp_path / "bad.prof"
    prof.write_text("loudness = 11\n")
    with pytest.raises(SystemExit) as exc:
        main(["calibrate", "--profile", str(prof)])
    assert exc.value.code == 2


def test_calibrate_peak_profile(tmp_path, capsys):
    prof = tmp_path / "peak215.prof"
    prof.write_text(PEAK_PROFILE)
    assert main(["calibrate", "--profile", str(prof)]) == 0
    out = capsys.readouterr().out
    assert out.strip().splitlines()[-1] == "best: 21500"
    assert len(out.strip().splitlines()) == 9


def test_calibrate_all_fail_warns(capsys):
    assert main(["calibrate", "--distance", "50", "--snr", "-20", "--values", "21000,22000"]) == 0
    cap = capsys.readouterr()
    assert "best: 21000" in cap.out
    assert "warning" in cap.err


def test_config_env_and_flag_override(tmp_path, monkeypatch, capsys):
    conf = tmp_path / "modem.conf"
    conf.write_text("symbol_period_samples = 96\ncarrier_freq_hz = 21000\n")
    monkeypatch.setenv("BATNET_CONFIG", str(conf))
    wav = tmp_path / "x.wav"
    main(["encode", "--text", "Hello, world!", "--out", str(wav)])
    assert len(read_wav(wav)) == 100 * 96
    assert "raw rate: 1500.0 bit/s" in capsys.readouterr().err
    main(["encode", "--text", "Hello, world!", "--symbol-len", "128", "--out", str(wav)])
    assert len(read_wav(wav)) == 100 * 128
    # the decoder must use the same settings
    assert main(["decode", "--in", str(wav), "--symbol-len", "128"]) == 0


def test_file_pipe_composition(tmp_path, capsysbinary):
    rng = np.random.default_rng(12)
    tx, rx, src = tmp_path / "tx.wav", tmp_path / "rx.wav", tmp_path / "p.bin"
    for i in range(100):
        payload = rng.bytes(int(rng.integers(0, 80)))
        src.write_bytes(payload)
        assert main(["encode", "--file", str(src), "--out", str(tx)]) == 0
        assert main(["simulate", "--in", str(tx), "--out", str(rx), "--seed", str(i)]) == 0
        capsysbinary.readouterr()
        assert main(["decode", "--in", str(rx)]) == 0
        assert capsysbinary.readouterr().out == payload


@pytest.mark.parametrize("text", ["Hello, world!", "", "a longer message over a shell pipe"])
def test_shell_pipeline(text):
    env = dict(os.environ)
    env.pop("BATNET_CONFIG", None)
    enc = run("encode", "--text", text, env=env)
    assert enc.returncode == 0
    sim = run("simulate", "--seed", "1", stdin=enc.stdout, env=env)
    assert sim.returncode == 0
    dec = run("decode", stdin=sim.stdout, env=env)
    assert dec.returncode == 0, dec.stderr
    assert dec.stdout == text.encode()
