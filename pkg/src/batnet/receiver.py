"""Streaming receiver: PCM chunks in, decoded frames out.

One-shot decoding is the same state machine fed a single chunk, so results
are identical however the input is split.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decoder import FrameDecodeResult, decode_block, decode_frame
from .demodulator import (
    BASEBAND_BLOCK, BasebandSequence, SoftSymbol, SyncResult, SyncScanner, baseband_block,
    center_offset, sample_symbols, window_length,
)
from .errors import BlockError, HeaderError
from .modem_core import MAX_PAYLOAD_BYTES, ModemConfig, data_block_count
from .modulator import PcmBuffer


@dataclass
class ReceivedFrame:
    sync: SyncResult
    softs: list = field(default_factory=list)  # header + data slots
    result: FrameDecodeResult | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None and self.result.blocks_failed == 0


class StreamingDemodulator:
    """Single-owner receive state machine.

    Call :meth:`feed` with consecutive PCM chunks and :meth:`flush` once at the
    end of the stream. Both return the frames completed during the call.
    """

    def __init__(self, config: ModemConfig, track_phase: bool = True):
        self.config = config
        self.track_phase = track_phase
        self._pcm = np.zeros(0)
        self._pcm_base = 0
        self._bb = np.zeros(0, dtype=complex)
        self._bb_base = 0
        self._scanner = SyncScanner(config)
        self._pending: SyncResult | None = None
        self._final = False
        self.syncs: list[SyncResult] = []

    @property
    def samples_seen(self) -> int:
        return self._pcm_base + len(self._pcm)

    def feed(self, samples) -> list[ReceivedFrame]:
        if self._final:
            raise RuntimeError("stream already flushed")
        chunk = np.asarray(samples, dtype=np.float64)
        self._pcm = np.concatenate((self._pcm, chunk))
        return self._process()

    def flush(self) -> list[ReceivedFrame]:
        self._final = True
        return self._process()

    # -- internals -----------------------------------------------------------

    @property
    def _bb_end(self) -> int:
        return self._bb_base + len(self._bb)

    def _extend_baseband(self):
        w = window_length(self.config)
        need_ahead = w - w // 2 - 1
        total = self.samples_seen
        parts = []
        start = self._bb_end
        while True:
            stop = start + BASEBAND_BLOCK
            if stop + need_ahead <= total:
                parts.append(baseband_block(self._pcm, self._pcm_base, start, stop, self.config))
                start = stop
            elif self._final and start < total:
                parts.append(baseband_block(self._pcm, self._pcm_base, start, total, self.config))
                start = total
            else:
                break
        if parts:
            self._bb = np.concatenate([self._bb] + parts)

    def _bb_view(self) -> BasebandSequence:
        cfg = self.config
        return BasebandSequence(self._bb, cfg.sample_rate_hz, cfg.carrier_freq_hz, self._bb_base)

    def _slot_available(self, sync: SyncResult, slot: int) -> bool:
        idx = sync.frame_start_sample + slot * self.config.symbol_period_samples + center_offset(self.config)
        return idx < self._bb_end

    def _finish_frame(self, sync: SyncResult) -> ReceivedFrame | None:
        """Decode a synced frame, or return None while its symbols are still arriving."""
        cfg = self.config
        n = cfg.symbols_per_block
        first = cfg.framing_symbols
        if not self._slot_available(sync, first + n - 1):
            return self._truncated(sync) if self._final else None
        bb = self._bb_view()
        header = sample_symbols(bb, sync, n, cfg, first)
        try:
            length = decode_block(header, 0.0, cfg).data_bits
        except BlockError:
            return ReceivedFrame(sync, header, None, "header error")
        if length > MAX_PAYLOAD_BYTES:
            return ReceivedFrame(sync, header, None, "header error")
        count = n * (1 + data_block_count(length, cfg))
        if not self._slot_available(sync, first + count - 1):
            return self._truncated(sync) if self._final else None
        softs = sample_symbols(bb, sync, count, cfg, first)
        result = decode_frame(softs, cfg, track_phase=self.track_phase)
        return ReceivedFrame(sync, softs, result, None)

    def _truncated(self, sync: SyncResult) -> ReceivedFrame:
        cfg = self.config
        first = cfg.framing_symbols
        ts = cfg.symbol_period_samples
        available = (self._bb_end - 1 - sync.frame_start_sample - center_offset(cfg)) // ts + 1 - first
        softs = sample_symbols(self._bb_view(), sync, max(available, 0), cfg, first)
        return ReceivedFrame(sync, softs, None, "truncated frame")

    def _frame_end(self, frame: ReceivedFrame) -> int:
        cfg = self.config
        n_slots = cfg.framing_symbols + len(frame.softs)
        return frame.sync.frame_start_sample + n_slots * cfg.symbol_period_samples

    def _process(self) -> list[ReceivedFrame]:
        self._extend_baseband()
        out = []
        while True:
            if self._pending is None:
                sync = self._scanner.scan(self._bb, self._bb_base, self._bb_end, self._final)
                if sync is None:
                    break
                self._pending = sync
                self.syncs.append(sync)
            frame = self._finish_frame(self._pending)
            if frame is None:
                break
            out.append(frame)
            self._pending = None
            self._scanner.cursor = max(self._scanner.cursor, self._frame_end(frame))
        self._trim()
        return out

    def _trim(self):
        cfg = self.config
        keep_from = self._pending.frame_start_sample if self._pending else self._scanner.cursor
        keep_from = min(keep_from, self._bb_end) - cfg.symbol_period_samples
        if keep_from > self._bb_base:
            self._bb = self._bb[keep_from - self._bb_base:]
            self._bb_base = keep_from
        w = window_length(cfg)
        pcm_from = self._bb_end - w
        if pcm_from > self._pcm_base:
            self._pcm = self._pcm[pcm_from - self._pcm_base:]
            self._pcm_base = pcm_from


def receive(pcm: PcmBuffer | np.ndarray, config: ModemConfig, track_phase: bool = True,
            chunk_size: int | None = None) -> list[ReceivedFrame]:
    """Run the receiver over a whole buffer, optionally in fixed-size chunks."""
    samples = pcm.samples if isinstance(pcm, PcmBuffer) else np.asarray(pcm, dtype=np.float64)
    if isinstance(pcm, PcmBuffer) and pcm.sample_rate_hz != config.sample_rate_hz:
        raise ValueError(f"PCM rate {pcm.sample_rate_hz} != configured {config.sample_rate_hz}")
    demod = StreamingDemodulator(config, track_phase=track_phase)
    frames = []
    step = chunk_size or max(len(samples), 1)
    for i in range(0, len(samples), step):
        frames += demod.feed(samples[i:i + step])
    frames += demod.flush()
    return frames


def receive_first(pcm, config: ModemConfig, track_phase: bool = True) -> ReceivedFrame | None:
    frames = receive(pcm, config, track_phase)
    return frames[0] if frames else None


__all__ = ["ReceivedFrame", "StreamingDemodulator", "receive", "receive_first", "SoftSymbol",
           "HeaderError"]
