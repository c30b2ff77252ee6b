"""802.11p transmitter: scrambler, convolutional coder, puncturer, interleaver,
constellation mapper, OFDM modulator, preamble and PPDU assembly.

Bit sequences are ``uint8`` numpy arrays of 0/1. Complex baseband samples are
``complex128`` at 10 Msample/s.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import kernels
from .numerology import (
    DATA_FFT_INDEX,
    OCCUPIED_FFT_INDEX,
    PHY,
    PILOT_FFT_INDEX,
    SERVICE_BITS,
    TAIL_BITS,
    McsMode,
    Modulation,
    frame_sample_count,
    mcs_table,
    payload_capacity,
)

DEFAULT_SCRAMBLER_SEED = (1, 1, 1, 1, 1, 1, 1)

# Frequency-domain training sequences on bins -26..26.
STS_FREQ = np.sqrt(13 / 6) * np.array(
    [0, 0, 1 + 1j, 0, 0, 0, -1 - 1j, 0, 0, 0, 1 + 1j, 0, 0, 0, -1 - 1j, 0, 0, 0, -1 - 1j, 0, 0, 0,
     1 + 1j, 0, 0, 0, 0, 0, 0, 0, -1 - 1j, 0, 0, 0, -1 - 1j, 0, 0, 0, 1 + 1j, 0, 0, 0, 1 + 1j, 0,
     0, 0, 1 + 1j, 0, 0, 0, 1 + 1j, 0, 0]
)
LTS_FREQ = np.array(
    [1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1,
     0,
     1, -1, -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1],
    dtype=float,
)
# Pilot base values on bins (-21, -7, 7, 21); multiplied by the per-symbol polarity.
PILOT_BASE = np.array([1.0, 1.0, 1.0, -1.0])

PUNCTURE_PATTERNS = {
    Fraction(1, 2): np.array([1, 1], dtype=bool),
    Fraction(2, 3): np.array([1, 1, 1, 0], dtype=bool),
    Fraction(3, 4): np.array([1, 1, 0, 1, 0, 1], dtype=bool),
}

# Gray-coded amplitude levels per axis, indexed by the axis bit label (b0 first).
_AXIS_LEVELS = {
    1: np.array([-1.0, 1.0]),
    2: np.array([-1.0, 1.0]),
    4: np.array([-3.0, -1.0, 3.0, 1.0]),  # labels 00, 01, 10, 11
    6: np.array([-7.0, -5.0, -1.0, -3.0, 7.0, 5.0, 1.0, 3.0]),  # labels 000 ... 111
}
_NORM = {1: 1.0, 2: 1 / np.sqrt(2), 4: 1 / np.sqrt(10), 6: 1 / np.sqrt(42)}


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if arr.size and arr.max() > 1:
        raise ValueError("bit sequences may only contain 0 and 1")
    return arr


# --- scrambler ------------------------------------------------------------------

@lru_cache(maxsize=128)
def _lfsr_period(seed: tuple[int, ...]) -> np.ndarray:
    reg = list(seed)
    out = np.empty(127, dtype=np.uint8)
    for i in range(127):
        fb = reg[6] ^ reg[3]  # x^7 + x^4 + 1
        out[i] = fb
        reg = [fb] + reg[:6]
    out.flags.writeable = False
    return out


def lfsr_sequence(n: int, seed=DEFAULT_SCRAMBLER_SEED) -> np.ndarray:
    """Free-running output of the x^7 + x^4 + 1 register started at ``seed`` (cells x1..x7)."""
    seed = tuple(int(b) for b in seed)
    if len(seed) != 7 or any(b not in (0, 1) for b in seed):
        raise ValueError("scrambler seed must be 7 binary cells")
    if not any(seed):
        raise ValueError("all-zero scrambler seed is degenerate")
    return np.resize(_lfsr_period(seed), n)


def scramble(bits, seed=DEFAULT_SCRAMBLER_SEED) -> np.ndarray:
    bits = _as_bits(bits)
    return bits ^ lfsr_sequence(bits.size, seed)


descramble = scramble


def pilot_polarity(symbol_index: int) -> float:
    """+1/-1 pilot polarity for OFDM symbol ``symbol_index`` (SIGNAL is symbol 0)."""
    return 1.0 - 2.0 * float(_lfsr_period(DEFAULT_SCRAMBLER_SEED)[symbol_index % 127])


# --- coding -----------------------------------------------------------------------

def convolutional_encode(bits) -> np.ndarray:
    """Rate-1/2, K=7 (133, 171) encoder from the zero state; output A0 B0 A1 B1 ..."""
    bits = _as_bits(bits)
    if bits.size == 0:
        raise ValueError("cannot encode an empty bit sequence")
    return kernels.conv_encode(bits)


def _pattern(rate) -> np.ndarray:
    try:
        return PUNCTURE_PATTERNS[Fraction(rate)]
    except KeyError:
        raise ValueError(f"unsupported code rate {rate}") from None


def puncture(coded, rate) -> np.ndarray:
    coded = _as_bits(coded)
    pattern = _pattern(rate)
    if Fraction(rate) == Fraction(1, 2):
        return coded.copy()
    if coded.size % pattern.size:
        raise ValueError(
            f"coded length {coded.size} is not a multiple of the rate-{rate} pattern length {pattern.size}"
        )
    return coded[np.tile(pattern, coded.size // pattern.size)]


# --- interleaver -----------------------------------------------------------------

@lru_cache(maxsize=16)
def interleaver_permutation(n_cbps: int, n_bpsc: int) -> np.ndarray:
    """``perm[k]`` is the output position of input bit ``k`` within one block."""
    k = np.arange(n_cbps)
    i = (n_cbps // 16) * (k % 16) + k // 16
    s = max(n_bpsc // 2, 1)
    j = s * (i // s) + (i + n_cbps - (16 * i) // n_cbps) % s
    j.flags.writeable = False
    return j


def interleave(coded, mode: McsMode) -> np.ndarray:
    coded = _as_bits(coded)
    if coded.size % mode.n_cbps:
        raise ValueError(f"length {coded.size} is not a multiple of N_CBPS={mode.n_cbps}")
    perm = interleaver_permutation(mode.n_cbps, mode.n_bpsc)
    blocks = coded.reshape(-1, mode.n_cbps)
    out = np.empty_like(blocks)
    out[:, perm] = blocks
    return out.reshape(-1)


# --- mapping ---------------------------------------------------------------------

def axis_levels(n_bpsc: int) -> np.ndarray:
    """Normalised per-axis amplitude for each axis label (index = label value, MSB = first bit)."""
    return _AXIS_LEVELS[n_bpsc] * _NORM[n_bpsc]


def _bits_to_index(bits: np.ndarray) -> np.ndarray:
    weights = 1 << np.arange(bits.shape[-1] - 1, -1, -1)
    return bits.astype(np.int64) @ weights


def map_symbols(bits, mode_or_modulation) -> np.ndarray:
    """Gray-map bits onto the unit-energy constellation of the mode's modulation."""
    n_bpsc = _n_bpsc(mode_or_modulation)
    bits = _as_bits(bits)
    if bits.size % n_bpsc:
        raise ValueError(f"length {bits.size} is not a multiple of N_BPSC={n_bpsc}")
    groups = bits.reshape(-1, n_bpsc)
    levels = axis_levels(n_bpsc)
    if n_bpsc == 1:
        return levels[groups[:, 0]].astype(complex)
    half = n_bpsc // 2
    re = levels[_bits_to_index(groups[:, :half])]
    im = levels[_bits_to_index(groups[:, half:])]
    return re + 1j * im


def _n_bpsc(mode_or_modulation) -> int:
    if isinstance(mode_or_modulation, McsMode):
        return mode_or_modulation.n_bpsc
    return Modulation(mode_or_modulation).n_bpsc


def constellation(modulation) -> tuple[np.ndarray, np.ndarray]:
    """All points of a constellation and their bit labels, ordered by label."""
    n_bpsc = Modulation(modulation).n_bpsc
    labels = (np.arange(1 << n_bpsc)[:, None] >> np.arange(n_bpsc - 1, -1, -1)) & 1
    return map_symbols(labels.reshape(-1).astype(np.uint8), modulation), labels.astype(np.uint8)


# --- OFDM ------------------------------------------------------------------------

def _freq_to_time(freq_bins_m26_26: np.ndarray) -> np.ndarray:
    buf = np.zeros(PHY.fft_size, dtype=complex)
    buf[np.arange(-26, 27) % PHY.fft_size] = freq_bins_m26_26
    return np.fft.ifft(buf)


def load_subcarriers(points: np.ndarray, symbol_index, pilots: np.ndarray | None = None) -> np.ndarray:
    """Build 64-bin frequency buffers for one or more symbols.

    ``points`` has shape ``(..., 48)``; ``symbol_index`` broadcasts against the
    leading axes. ``pilots`` overrides the polarity-scaled pilot values.
    """
    points = np.asarray(points, dtype=complex)
    buf = np.zeros(points.shape[:-1] + (PHY.fft_size,), dtype=complex)
    buf[..., DATA_FFT_INDEX] = points
    if pilots is None:
        polarity = np.vectorize(pilot_polarity, otypes=[float])(np.asarray(symbol_index))
        pilots = np.asarray(polarity)[..., None] * PILOT_BASE
    buf[..., PILOT_FFT_INDEX] = pilots
    return buf


def add_cyclic_prefix(body: np.ndarray) -> np.ndarray:
    return np.concatenate([body[..., -PHY.cp_length:], body], axis=-1)


def ofdm_modulate(points, symbol_index: int, pilots=None) -> np.ndarray:
    """One 80-sample OFDM symbol: 48 data points, 4 pilots, IFFT (1/64 scale), 16-sample CP."""
    points = np.asarray(points, dtype=complex)
    if points.shape != (PHY.n_data_subcarriers,):
        raise ValueError(f"expected 48 constellation points, got shape {points.shape}")
    return add_cyclic_prefix(np.fft.ifft(load_subcarriers(points, symbol_index, pilots)))


def ofdm_modulate_block(points: np.ndarray, first_symbol_index: int) -> np.ndarray:
    """Vectorised :func:`ofdm_modulate` over an ``(n_symbols, 48)`` array; returns ``(n_symbols, 80)``."""
    points = np.asarray(points, dtype=complex).reshape(-1, PHY.n_data_subcarriers)
    idx = first_symbol_index + np.arange(points.shape[0])
    return add_cyclic_prefix(np.fft.ifft(load_subcarriers(points, idx), axis=-1))


@lru_cache(maxsize=1)
def _preamble() -> np.ndarray:
    sts = _freq_to_time(STS_FREQ)  # period 16
    lts = _freq_to_time(LTS_FREQ)
    short = np.tile(sts[:16], 10)
    long_ = np.concatenate([lts[-32:], lts, lts])
    out = np.concatenate([short, long_])
    out.flags.writeable = False
    return out


def generate_preamble() -> np.ndarray:
    """320-sample PLCP preamble: 10 short training periods, GI2, two long training bodies."""
    return _preamble().copy()


def lts_body() -> np.ndarray:
    return _freq_to_time(LTS_FREQ)


# --- SIGNAL / PPDU -----------------------------------------------------------------

def signal_bits(mode: McsMode, payload_octets: int) -> np.ndarray:
    """The 24-bit SIGNAL word: RATE(4) reserved(1) LENGTH(12, LSB first) parity(1) tail(6)."""
    if not 0 <= payload_octets < 4096:
        raise ValueError(f"payload_octets={payload_octets} does not fit the 12-bit LENGTH field")
    length = [(payload_octets >> i) & 1 for i in range(12)]
    head = list(mode.rate_code) + [0] + length
    word = head + [sum(head) & 1] + [0] * TAIL_BITS
    return np.array(word, dtype=np.uint8)


_SIGNAL_MODE = mcs_table()[0]


def build_signal_field(mode: McsMode, payload_octets: int) -> np.ndarray:
    """SIGNAL symbol: always BPSK rate 1/2, pilot polarity index 0."""
    coded = convolutional_encode(signal_bits(mode, payload_octets))
    points = map_symbols(interleave(coded, _SIGNAL_MODE), Modulation.BPSK)
    return ofdm_modulate(points, 0)


@dataclass
class TxFrame:
    preamble: np.ndarray
    signal_symbol: np.ndarray
    data_symbols: np.ndarray  # (n_symbols, 80)
    mode: McsMode
    payload_bits: int

    @property
    def n_symbols(self) -> int:
        return self.data_symbols.shape[0]

    @property
    def samples(self) -> np.ndarray:
        return np.concatenate([self.preamble, self.signal_symbol, self.data_symbols.reshape(-1)])

    def __len__(self) -> int:
        return frame_sample_count(self.n_symbols)


def data_field_bits(payload, mode: McsMode, n_symbols: int, seed=DEFAULT_SCRAMBLER_SEED) -> np.ndarray:
    """Scrambled DATA field: SERVICE + payload scrambled, tail and pad left as zeros."""
    payload = _as_bits(payload)
    capacity = payload_capacity(mode, n_symbols)
    if payload.size > capacity:
        raise ValueError(
            f"payload of {payload.size} bits exceeds the {capacity}-bit capacity of "
            f"{n_symbols} {mode} symbols"
        )
    head = np.concatenate([np.zeros(SERVICE_BITS, dtype=np.uint8), payload])
    out = np.zeros(n_symbols * mode.n_dbps, dtype=np.uint8)
    out[: head.size] = scramble(head, seed)
    return out


def encode_data_bits(data_bits: np.ndarray, mode: McsMode) -> np.ndarray:
    """encode -> puncture -> interleave -> map, returning ``(n_symbols, 48)`` points."""
    coded = puncture(convolutional_encode(data_bits), mode.code_rate)
    points = map_symbols(interleave(coded, mode), mode)
    return points.reshape(-1, PHY.n_data_subcarriers)


def transmit_frame(payload, mode: McsMode, n_symbols: int, seed=DEFAULT_SCRAMBLER_SEED) -> TxFrame:
    if n_symbols < 1:
        raise ValueError("a frame needs at least one DATA symbol")
    payload = _as_bits(payload)
    data = data_field_bits(payload, mode, n_symbols, seed)
    points = encode_data_bits(data, mode)
    return TxFrame(
        preamble=generate_preamble(),
        signal_symbol=build_signal_field(mode, -(-payload.size // 8)),
        data_symbols=ofdm_modulate_block(points, 1),
        mode=mode,
        payload_bits=payload.size,
    )


def write_iq(path, samples) -> None:
    """Dump samples as interleaved little-endian float32 (re, im)."""
    np.asarray(samples).astype("<c8").tofile(Path(path))


def read_iq(path) -> np.ndarray:
    return np.fromfile(Path(path), dtype="<c8").astype(np.complex128)
