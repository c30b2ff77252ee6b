"""802.11p PHY constants, the MCS table and frame-length arithmetic."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np


class Modulation(str, Enum):
    BPSK = "BPSK"
    QPSK = "QPSK"
    QAM16 = "16QAM"
    QAM64 = "64QAM"

    @property
    def n_bpsc(self) -> int:
        return {"BPSK": 1, "QPSK": 2, "16QAM": 4, "64QAM": 6}[self.value]


@dataclass(frozen=True)
class PhyParams:
    fft_size: int = 64
    sample_rate: float = 10.0e6
    cp_length: int = 16
    n_data_subcarriers: int = 48
    n_pilot_subcarriers: int = 4
    pilot_bins: tuple[int, ...] = (-21, -7, 7, 21)
    data_bins: tuple[int, ...] = field(
        default=tuple(k for k in range(-26, 27) if k != 0 and k not in (-21, -7, 7, 21))
    )
    subcarrier_spacing: float = 156_250.0
    symbol_duration: float = 8.0e-6
    gi_duration: float = 1.6e-6
    carrier_frequency: float = 5.9e9

    @property
    def fft_duration(self) -> float:
        return self.fft_size / self.sample_rate

    @property
    def symbol_length(self) -> int:
        """Samples per OFDM symbol including the cyclic prefix (80)."""
        return self.fft_size + self.cp_length

    @property
    def occupied_bins(self) -> tuple[int, ...]:
        return tuple(k for k in range(-26, 27) if k != 0)


PHY = PhyParams()

PREAMBLE_LENGTH = 320  # 10 x 16-sample STS + 32-sample GI2 + 2 x 64-sample LTS
SIGNAL_LENGTH = PHY.symbol_length
SERVICE_BITS = 16
TAIL_BITS = 6


def fft_index(bins) -> np.ndarray:
    """Map signed subcarrier indices to positions in a length-64 FFT buffer."""
    return np.asarray(bins, dtype=np.int64) % PHY.fft_size


DATA_FFT_INDEX = fft_index(PHY.data_bins)
PILOT_FFT_INDEX = fft_index(PHY.pilot_bins)
OCCUPIED_FFT_INDEX = fft_index(PHY.occupied_bins)


@dataclass(frozen=True)
class McsMode:
    modulation: Modulation
    code_rate: Fraction
    rate_code: tuple[int, int, int, int]  # R1..R4 bits of the SIGNAL RATE field

    @property
    def n_bpsc(self) -> int:
        return self.modulation.n_bpsc

    @property
    def n_cbps(self) -> int:
        return PHY.n_data_subcarriers * self.n_bpsc

    @property
    def n_dbps(self) -> int:
        n = self.n_cbps * self.code_rate
        assert n.denominator == 1
        return int(n)

    @property
    def name(self) -> str:
        return f"{self.modulation.value}-{self.code_rate.numerator}/{self.code_rate.denominator}"

    def __str__(self) -> str:
        return self.name


_MCS = (
    McsMode(Modulation.BPSK, Fraction(1, 2), (1, 1, 0, 1)),
    McsMode(Modulation.BPSK, Fraction(3, 4), (1, 1, 1, 1)),
    McsMode(Modulation.QPSK, Fraction(1, 2), (0, 1, 0, 1)),
    McsMode(Modulation.QPSK, Fraction(3, 4), (0, 1, 1, 1)),
    McsMode(Modulation.QAM16, Fraction(1, 2), (1, 0, 0, 1)),
    McsMode(Modulation.QAM16, Fraction(3, 4), (1, 0, 1, 1)),
    McsMode(Modulation.QAM64, Fraction(2, 3), (0, 0, 0, 1)),
    McsMode(Modulation.QAM64, Fraction(3, 4), (0, 0, 1, 1)),
)


def mcs_table() -> list[McsMode]:
    """The eight 802.11p modes in ascending data-rate order (3 ... 27 Mb/s)."""
    return list(_MCS)


def mode_by_name(name: str) -> McsMode:
    """Look up a mode by name; accepts ``"BPSK-1/2"``, ``"bpsk 1/2"``, ``"16qam_3/4"`` etc."""
    def squash(text: str) -> str:
        return "".join(ch for ch in text.upper() if ch not in " -_")

    key = squash(name)
    for mode in _MCS:
        if squash(mode.name) == key:
            return mode
    valid = ", ".join(m.name for m in _MCS)
    raise ValueError(f"unknown MCS mode {name!r}; valid modes: {valid}")


def data_rate(mode: McsMode) -> float:
    """Data rate in bit/s."""
    return mode.n_dbps / PHY.symbol_duration


def frame_sample_count(n_ofdm_symbols: int) -> int:
    if n_ofdm_symbols < 0:
        raise ValueError("n_ofdm_symbols must be >= 0")
    return PREAMBLE_LENGTH + SIGNAL_LENGTH + PHY.symbol_length * n_ofdm_symbols


def payload_capacity(mode: McsMode, n_symbols: int) -> int:
    """Largest payload (bits) that fits ``n_symbols`` DATA symbols after SERVICE and tail."""
    return n_symbols * mode.n_dbps - SERVICE_BITS - TAIL_BITS
