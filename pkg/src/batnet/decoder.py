"""Block-wise CRC decoding over soft symbols with carrier-phase feed-forward.

Every 7-symbol block is decoded by searching a small grid of phase offsets; the
offset that yields a CRC-valid block with the best mean projection wins, and
the resulting phase estimate is carried into the next block.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .demodulator import SoftSymbol, nearest_index
from .errors import BlockError, HeaderError, ZeroMagnitude
from .modem_core import (
    BITS_PER_SYMBOL, GRAY_DECODE, MAX_PAYLOAD_BYTES, PHASE_STEP, ModemConfig, crc_table,
    data_block_count, words_to_payload,
)


@dataclass(frozen=True)
class BlockDecodeResult:
    data_bits: int
    phase_correction_rad: float
    flips_used: int
    confidence: float
    indices: tuple = ()
    search_offset_rad: float = 0.0


@dataclass(frozen=True)
class FrameDecodeResult:
    payload: bytes
    blocks_failed: int
    cumulative_phase_track: tuple
    payload_len: int = 0
    flips_used: int = 0
    blocks: tuple = ()

    @property
    def phases_before(self) -> list[float]:
        """Accumulated phase each block was decided with."""
        return [0.0] + list(self.cumulative_phase_track[:-1])


def soft_values(softs) -> np.ndarray:
    return np.array([s.value if isinstance(s, SoftSymbol) else s for s in softs], dtype=complex)


def wrap_angle(x):
    return np.angle(np.exp(1j * np.asarray(x)))


def hard_decide(soft, accumulated_phase: float = 0.0) -> tuple[int, float]:
    value = soft.value if isinstance(soft, SoftSymbol) else complex(soft)
    if value == 0:
        raise ZeroMagnitude("cannot decide a zero-magnitude symbol")
    angle = np.angle(value) - accumulated_phase
    index = int(nearest_index(angle))
    return index, float(np.cos(wrap_angle(angle - index * PHASE_STEP)))


def phase_grid(config: ModemConfig) -> np.ndarray:
    hw = config.phase_search_halfwidth_rad
    if config.phase_search_steps == 1:
        return np.zeros(1)
    return np.linspace(-hw, hw, config.phase_search_steps)


def _flip_masks(resid: np.ndarray, max_flips: int) -> np.ndarray:
    """Per grid row, masks flipping the r least confident symbols, r = 1..max_flips."""
    n_rows, n = resid.shape
    m = min(max_flips, n)
    # stable sort on rounded magnitudes: (near-)equal residuals keep symbol order
    order = np.argsort(-np.round(np.abs(resid), 9), axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(n)[None, :].repeat(n_rows, axis=0), axis=1)
    return ranks[:, None, :] < np.arange(1, m + 1)[None, :, None]


def _words(indices: np.ndarray) -> np.ndarray:
    bits = GRAY_DECODE[indices]
    n = indices.shape[-1]
    shifts = BITS_PER_SYMBOL * np.arange(n - 1, -1, -1)
    return np.sum(bits << shifts, axis=-1)


def _crc_ok(words: np.ndarray, config: ModemConfig) -> np.ndarray:
    table = crc_table(config)
    return table[words >> config.block_crc_bits] == (words & ((1 << config.block_crc_bits) - 1))


def _pick(scores, deltas, flips, valid):
    cand = np.flatnonzero(valid)
    if len(cand) == 0:
        return None
    # max score, then smallest |delta|, then fewest flips
    order = np.lexsort((flips[cand], np.abs(deltas[cand]), -np.round(scores[cand], 12)))
    return cand[order[0]]


def decode_block(softs, accumulated_phase: float, config: ModemConfig) -> BlockDecodeResult:
    values = soft_values(softs)
    n = config.symbols_per_block
    if len(values) != n:
        raise ValueError(f"a block is {n} symbols, got {len(values)}")
    deltas = phase_grid(config)
    theta = np.angle(values) - accumulated_phase
    ang = theta[None, :] - deltas[:, None]
    idx = nearest_index(ang)
    resid = wrap_angle(ang - idx * PHASE_STEP)
    conf = np.cos(resid)
    words = _words(idx)
    valid = _crc_ok(words, config)
    flips = np.zeros(len(deltas), dtype=np.int64)
    k = _pick(conf.mean(axis=1), deltas, flips, valid)
    if k is not None:
        chosen_idx, chosen_resid, delta, used = idx[k], resid[k], deltas[k], 0
    else:
        if config.max_symbol_flips < 1:
            raise BlockError("block fails CRC", int(words[len(deltas) // 2] >> config.block_crc_bits))
        masks = _flip_masks(resid, config.max_symbol_flips)
        direction = np.where(resid >= 0, 1, -1)[:, None, :]
        f_idx = np.mod(idx[:, None, :] + masks * direction, 8)
        f_resid = np.where(masks, resid[:, None, :] - direction * PHASE_STEP, resid[:, None, :])
        f_words = _words(f_idx)
        f_valid = _crc_ok(f_words, config)
        f_scores = np.cos(f_resid).mean(axis=2)
        f_deltas = np.broadcast_to(deltas[:, None], f_valid.shape)
        f_flips = masks.sum(axis=2)
        k = _pick(f_scores.ravel(), f_deltas.ravel(), f_flips.ravel(), f_valid.ravel())
        if k is None:
            raise BlockError("no CRC-valid candidate within the flip budget",
                             int(words[len(deltas) // 2] >> config.block_crc_bits))
        i, j = np.unravel_index(k, f_valid.shape)
        chosen_idx, chosen_resid, delta, used = f_idx[i, j], f_resid[i, j], deltas[i], int(f_flips[i, j])
    limit = config.phase_search_halfwidth_rad + math.pi / 16
    correction = float(np.clip(delta + chosen_resid.mean(), -limit, limit))
    word = int(_words(chosen_idx))
    return BlockDecodeResult(
        data_bits=word >> config.block_crc_bits,
        phase_correction_rad=correction,
        flips_used=used,
        confidence=float(np.cos(chosen_resid).mean()),
        indices=tuple(int(x) for x in chosen_idx),
        search_offset_rad=float(delta),
    )


def decode_frame(softs, config: ModemConfig, track_phase: bool = True) -> FrameDecodeResult:
    """Decode the header block and then every data block it announces.

    ``softs`` starts at the header block. With ``track_phase`` off, every block
    is decided against the preamble reference alone.
    """
    values = soft_values(softs)
    n = config.symbols_per_block
    if len(values) < n:
        raise HeaderError("not enough symbols for a header block")
    try:
        header = decode_block(values[:n], 0.0, config)
    except BlockError as exc:
        raise HeaderError("header block fails CRC") from exc
    length = header.data_bits
    if length > MAX_PAYLOAD_BYTES:
        raise HeaderError(f"header announces {length} bytes, above the {MAX_PAYLOAD_BYTES} cap")
    acc = header.phase_correction_rad if track_phase else 0.0
    track = [acc]
    words, blocks, failed, flips = [], [header], 0, header.flips_used
    for b in range(data_block_count(length, config)):
        chunk = values[n * (b + 1):n * (b + 2)]
        if len(chunk) < n:
            words.append(0)
            blocks.append(None)
            failed += 1
            track.append(acc)
            continue
        try:
            res = decode_block(chunk, acc, config)
        except BlockError as exc:
            words.append(exc.best_effort_bits)
            blocks.append(None)
            failed += 1
        else:
            words.append(res.data_bits)
            blocks.append(res)
            flips += res.flips_used
            if track_phase:
                acc += res.phase_correction_rad
        track.append(acc)
    return FrameDecodeResult(
        payload=words_to_payload(words, length, config),
        blocks_failed=failed,
        cumulative_phase_track=tuple(track),
        payload_len=length,
        flips_used=flips,
        blocks=tuple(blocks),
    )


def symbol_phase_track(result: FrameDecodeResult, n_symbols: int, config: ModemConfig) -> np.ndarray:
    """Per-symbol accumulated phase matching the block decisions."""
    per_block = np.repeat(result.phases_before, config.symbols_per_block)
    out = np.zeros(n_symbols)
    m = min(n_symbols, len(per_block))
    out[:m] = per_block[:m]
    if n_symbols > m and len(per_block):
        out[m:] = result.cumulative_phase_track[-1]
    return out
