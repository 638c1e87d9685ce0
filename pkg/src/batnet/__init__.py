"""Near-ultrasound 8-PSK acoustic modem with a channel simulator and evaluation harness."""
from .channel_sim import ChannelProfile, apply_channel, resample
from .decoder import decode_block, decode_frame
from .demodulator import detect_preamble, mix_to_baseband, sample_symbols
from .evaluation import QualityReport, calibrate, run_sweep, run_trial, transmission_quality
from .modem_core import Frame, ModemConfig, build_frame, crc5_checksum, gray_decode, gray_encode
from .modulator import PcmBuffer, modulate
from .receiver import receive

__version__ = "0.1.0"
