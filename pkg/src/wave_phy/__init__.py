"""Bit-accurate IEEE 802.11p baseband PHY simulator with vehicular channel models."""
from .channel import ChannelFamily, ChannelScenario, apply_awgn, apply_channel, doppler_shift, make_fading
from .harness import BerPoint, StopRule, SweepConfig, preset, run_ber_point, run_sweep, theoretical_ber, write_csv
from .numerology import PHY, McsMode, data_rate, frame_sample_count, mcs_table, mode_by_name
from .rxchain import receive_frame
from .txchain import TxFrame, transmit_frame

__all__ = [
    "PHY", "McsMode", "mcs_table", "mode_by_name", "data_rate", "frame_sample_count",
    "TxFrame", "transmit_frame", "receive_frame",
    "ChannelFamily", "ChannelScenario", "apply_awgn", "apply_channel", "doppler_shift", "make_fading",
    "BerPoint", "StopRule", "SweepConfig", "preset", "run_ber_point", "run_sweep", "theoretical_ber", "write_csv",
]
__version__ = "0.1.0"
