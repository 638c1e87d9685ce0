"""Symbol-level vocabulary shared by transmitter and receiver.

Holds the physical-layer configuration, the Gray-coded 8-PSK constellation,
the 5-bit CRC used per coded block and the frame layout
(preamble | sync | trailer | header block | data blocks).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache

import numpy as np

from .errors import ConfigInvalid, PayloadTooLong

BITS_PER_SYMBOL = 3
CONSTELLATION_SIZE = 8
PHASE_STEP = 2 * math.pi / CONSTELLATION_SIZE
MAX_PAYLOAD_BYTES = 8192


@dataclass(frozen=True)
class ModemConfig:
    sample_rate_hz: int = 48000
    carrier_freq_hz: float = 22500.0
    symbol_period_samples: int = 160
    transition_samples: int = 32
    amplitude: float = 0.5
    preamble_symbols: int = 32
    sync_pattern: tuple = (0, 4, 2, 6, 1, 5, 3, 7)
    trailer_pattern: tuple = (0, 0, 4, 4)
    crc_poly: int = 0b100101  # x^5 + x^2 + 1
    crc_init: int = 0b11111
    block_data_bits: int = 16
    block_crc_bits: int = 5
    phase_search_halfwidth_rad: float = math.pi / 8
    phase_search_steps: int = 17
    max_symbol_flips: int = 2
    # receiver tunables
    energy_gate_ratio: float = 0.02
    sync_threshold: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "sync_pattern", tuple(int(k) for k in self.sync_pattern))
        object.__setattr__(self, "trailer_pattern", tuple(int(k) for k in self.trailer_pattern))
        self.validate()

    def validate(self):
        fs = self.sample_rate_hz
        if fs <= 0:
            raise ConfigInvalid("sample rate must be positive")
        if not 0 < self.carrier_freq_hz < fs / 2:
            raise ConfigInvalid(f"carrier {self.carrier_freq_hz} Hz outside (0, {fs / 2})")
        if not 0 < self.transition_samples < self.symbol_period_samples:
            raise ConfigInvalid("need 0 < transition_samples < symbol_period_samples")
        if not 0 < self.amplitude <= 1:
            raise ConfigInvalid("amplitude must lie in (0, 1]")
        if self.preamble_symbols < 2:
            raise ConfigInvalid("preamble needs at least 2 symbols")
        for k in self.sync_pattern + self.trailer_pattern:
            if not 0 <= k < CONSTELLATION_SIZE:
                raise ConfigInvalid(f"pattern index {k} outside constellation")
        if len(self.sync_pattern) < 2:
            raise ConfigInvalid("sync pattern needs at least 2 symbols")
        if (self.block_data_bits + self.block_crc_bits) % BITS_PER_SYMBOL:
            raise ConfigInvalid("block size must be a whole number of symbols")
        if self.crc_poly >> self.block_crc_bits != 1:
            raise ConfigInvalid("crc_poly degree must equal block_crc_bits")
        if not 0 <= self.crc_init < (1 << self.block_crc_bits):
            raise ConfigInvalid("crc_init wider than the register")
        if not 0 <= self.phase_search_halfwidth_rad <= math.pi / 8 + 1e-12:
            raise ConfigInvalid("phase search half-width must be within [0, pi/8]")
        if self.phase_search_steps < 1:
            raise ConfigInvalid("phase_search_steps must be >= 1")
        if self.max_symbol_flips < 0:
            raise ConfigInvalid("max_symbol_flips must be >= 0")

    @property
    def symbols_per_block(self) -> int:
        return (self.block_data_bits + self.block_crc_bits) // BITS_PER_SYMBOL

    @property
    def steady_samples(self) -> int:
        return self.symbol_period_samples - self.transition_samples

    @property
    def framing_symbols(self) -> int:
        return self.preamble_symbols + len(self.sync_pattern) + len(self.trailer_pattern)

    @property
    def raw_bit_rate(self) -> float:
        return self.sample_rate_hz / self.symbol_period_samples * BITS_PER_SYMBOL

    @property
    def effective_bit_rate(self) -> float:
        total = self.block_data_bits + self.block_crc_bits
        return self.raw_bit_rate * self.block_data_bits / total

    def replace(self, **changes) -> "ModemConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


def config_field_names():
    return [f.name for f in fields(ModemConfig)]


# -- constellation -----------------------------------------------------------

def gray_decode(index: int) -> int:
    """Constellation index -> 3-bit group (binary-reflected Gray code)."""
    return index ^ (index >> 1)


def gray_encode(bits: int) -> int:
    """3-bit group -> constellation index; inverse of :func:`gray_decode`."""
    index = bits
    shift = bits >> 1
    while shift:
        index ^= shift
        shift >>= 1
    return index


GRAY_DECODE = np.array([gray_decode(k) for k in range(CONSTELLATION_SIZE)], dtype=np.int64)
GRAY_ENCODE = np.array([gray_encode(b) for b in range(CONSTELLATION_SIZE)], dtype=np.int64)


@dataclass(frozen=True)
class Constellation:
    size: int = CONSTELLATION_SIZE
    points: np.ndarray = field(
        default_factory=lambda: np.exp(1j * PHASE_STEP * np.arange(CONSTELLATION_SIZE))
    )

    def phase(self, index: int) -> float:
        return PHASE_STEP * (index % self.size)

    def bits_of(self, index: int) -> int:
        return gray_decode(index)

    def index_of(self, bits: int) -> int:
        return gray_encode(bits)


def symbol_phase(index) -> np.ndarray:
    return PHASE_STEP * np.asarray(index)


# -- CRC ---------------------------------------------------------------------

def crc_register(value: int, nbits: int, poly: int = 0b100101, init: int = 0b11111,
                 width: int = 5) -> int:
    """Run an MSB-first CRC shift register over the low ``nbits`` of ``value``.

    No reflection and no final XOR. Feeding a full codeword (data followed by
    its checksum) leaves the register at zero.
    """
    mask = (1 << width) - 1
    taps = poly & mask
    reg = init & mask
    for i in range(nbits - 1, -1, -1):
        feedback = ((reg >> (width - 1)) ^ (value >> i)) & 1
        reg = (reg << 1) & mask
        if feedback:
            reg ^= taps
    return reg


def crc5_checksum(data: int, config: ModemConfig | None = None) -> int:
    config = config or ModemConfig()
    return crc_register(data, config.block_data_bits, config.crc_poly, config.crc_init,
                        config.block_crc_bits)


def crc5_verify(codeword: int, config: ModemConfig | None = None) -> bool:
    config = config or ModemConfig()
    nbits = config.block_data_bits + config.block_crc_bits
    return crc_register(codeword, nbits, config.crc_poly, config.crc_init,
                        config.block_crc_bits) == 0


@lru_cache(maxsize=8)
def _crc_table(data_bits: int, crc_bits: int, poly: int, init: int) -> np.ndarray:
    data = np.arange(1 << data_bits, dtype=np.int64)
    mask = (1 << crc_bits) - 1
    reg = np.full_like(data, init & mask)
    for i in range(data_bits - 1, -1, -1):
        feedback = ((reg >> (crc_bits - 1)) ^ (data >> i)) & 1
        reg = ((reg << 1) & mask) ^ (feedback * (poly & mask))
    reg.setflags(write=False)
    return reg


def crc_table(config: ModemConfig) -> np.ndarray:
    """Checksums of every possible data word, indexed by the data word."""
    return _crc_table(config.block_data_bits, config.block_crc_bits, config.crc_poly,
                      config.crc_init)


def encode_block(data: int, config: ModemConfig) -> int:
    if not 0 <= data < (1 << config.block_data_bits):
        raise ValueError(f"data word {data} wider than {config.block_data_bits} bits")
    return (data << config.block_crc_bits) | crc5_checksum(data, config)


def split_block(codeword: int, config: ModemConfig) -> tuple[int, int]:
    return codeword >> config.block_crc_bits, codeword & ((1 << config.block_crc_bits) - 1)


def block_to_symbols(codeword: int, config: ModemConfig) -> list[int]:
    n = config.symbols_per_block
    out = []
    for j in range(n):
        shift = BITS_PER_SYMBOL * (n - 1 - j)
        out.append(gray_encode((codeword >> shift) & 0b111))
    return out


def symbols_to_block(indices) -> int:
    word = 0
    for k in indices:
        word = (word << BITS_PER_SYMBOL) | gray_decode(int(k) % CONSTELLATION_SIZE)
    return word


# -- frame -------------------------------------------------------------------

@dataclass(frozen=True)
class Frame:
    payload_len: int
    header_block: int
    data_blocks: tuple
    symbol_sequence: np.ndarray
    framing_symbols: int

    @property
    def block_symbols(self) -> np.ndarray:
        """Header and data symbols, i.e. everything after the trailer."""
        return self.symbol_sequence[self.framing_symbols:]

    def __len__(self):
        return len(self.symbol_sequence)


def data_block_count(payload_len: int, config: ModemConfig) -> int:
    return math.ceil(8 * payload_len / config.block_data_bits)


def frame_symbol_count(payload_len: int, config: ModemConfig) -> int:
    return config.framing_symbols + config.symbols_per_block * (
        1 + data_block_count(payload_len, config))


def payload_to_words(payload: bytes, config: ModemConfig) -> list[int]:
    nbits = config.block_data_bits
    total = int.from_bytes(payload, "big") if payload else 0
    n_words = data_block_count(len(payload), config)
    pad = n_words * nbits - 8 * len(payload)
    total <<= pad
    return [(total >> (nbits * (n_words - 1 - i))) & ((1 << nbits) - 1) for i in range(n_words)]


def words_to_payload(words, length: int, config: ModemConfig) -> bytes:
    nbits = config.block_data_bits
    total = 0
    for w in words:
        total = (total << nbits) | int(w)
    total_bits = nbits * len(words)
    raw = total.to_bytes((total_bits + 7) // 8, "big") if total_bits else b""
    return raw[:length]


def build_frame(payload: bytes, config: ModemConfig | None = None) -> Frame:
    config = config or ModemConfig()
    payload = bytes(payload)
    if len(payload) > MAX_PAYLOAD_BYTES:
        raise PayloadTooLong(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD_BYTES}")
    header = encode_block(len(payload), config)
    blocks = tuple(encode_block(w, config) for w in payload_to_words(payload, config))
    symbols = [0] * config.preamble_symbols
    symbols += list(config.sync_pattern) + list(config.trailer_pattern)
    for cw in (header,) + blocks:
        symbols += block_to_symbols(cw, config)
    seq = np.array(symbols, dtype=np.int64)
    seq.setflags(write=False)
    return Frame(len(payload), header, blocks, seq, config.framing_symbols)


def parse_frame(symbols, config: ModemConfig | None = None) -> bytes:
    """Recover the payload from a noiseless symbol sequence.

    Accepts either the full sequence or just the block symbols after the
    trailer. Raises ``ValueError`` on any CRC failure.
    """
    config = config or ModemConfig()
    symbols = np.asarray(symbols, dtype=np.int64)
    framing = config.framing_symbols
    head = [0] * config.preamble_symbols + list(config.sync_pattern) + list(config.trailer_pattern)
    if len(symbols) >= framing and list(symbols[:framing]) == head:
        symbols = symbols[framing:]
    n = config.symbols_per_block
    if len(symbols) < n or len(symbols) % n:
        raise ValueError("symbol count is not a whole number of blocks")
    words = []
    for b in range(len(symbols) // n):
        cw = symbols_to_block(symbols[b * n:(b + 1) * n])
        if not crc5_verify(cw, config):
            raise ValueError(f"block {b} fails CRC")
        words.append(split_block(cw, config)[0])
    length = words[0]
    if data_block_count(length, config) != len(words) - 1:
        raise ValueError("header length disagrees with block count")
    return words_to_payload(words[1:], length, config)


# -- config files ------------------------------------------------------------

def _int_tuple(text: str) -> tuple:
    return tuple(int(v) for v in text.replace(" ", "").split(",") if v)


_CONFIG_CONVERTERS = {
    "sample_rate_hz": lambda v: int(v, 0),
    "carrier_freq_hz": float,
    "symbol_period_samples": lambda v: int(v, 0),
    "transition_samples": lambda v: int(v, 0),
    "amplitude": float,
    "preamble_symbols": lambda v: int(v, 0),
    "sync_pattern": _int_tuple,
    "trailer_pattern": _int_tuple,
    "crc_poly": lambda v: int(v, 0),
    "crc_init": lambda v: int(v, 0),
    "block_data_bits": lambda v: int(v, 0),
    "block_crc_bits": lambda v: int(v, 0),
    "phase_search_halfwidth_rad": float,
    "phase_search_steps": lambda v: int(v, 0),
    "max_symbol_flips": lambda v: int(v, 0),
    "energy_gate_ratio": float,
    "sync_threshold": float,
}


def config_from_dict(raw: dict, base: ModemConfig | None = None) -> ModemConfig:
    from .kvfile import coerce

    base = base or ModemConfig()
    try:
        changes = coerce(ModemConfig, raw, _CONFIG_CONVERTERS)
    except KeyError as exc:
        raise ConfigInvalid(str(exc)) from None
    except ValueError as exc:
        raise ConfigInvalid(f"bad config value: {exc}") from None
    return replace(base, **changes)


def load_config(path, base: ModemConfig | None = None) -> ModemConfig:
    from .kvfile import read_kv

    return config_from_dict(read_kv(path), base)
