"""802.11p receiver: timing, LTS channel estimate, zero-forcing equaliser,
hard demapper, deinterleaver, depuncturer, Viterbi decoder, descrambler.
"""
from __future__ import annotations

from fractions import Fraction
from typing import NamedTuple

import numpy as np

from . import kernels
from .numerology import (
    DATA_FFT_INDEX,
    OCCUPIED_FFT_INDEX,
    PHY,
    PILOT_FFT_INDEX,
    PREAMBLE_LENGTH,
    SERVICE_BITS,
    SIGNAL_LENGTH,
    McsMode,
    Modulation,
    mcs_table,
    payload_capacity,
)
from .txchain import (
    DEFAULT_SCRAMBLER_SEED,
    LTS_FREQ,
    PUNCTURE_PATTERNS,
    axis_levels,
    descramble,
    interleaver_permutation,
    lts_body,
)

ERASED = kernels.ERASED
SYNC_THRESHOLD = 0.6
UNRELIABLE_GAIN = 1e-12

# LTS values on the 52 occupied bins, in OCCUPIED_FFT_INDEX order (-26..-1, 1..26).
_LTS_OCCUPIED = LTS_FREQ[np.r_[0:26, 27:53]]
# positions of the data / pilot bins within the 52 occupied bins
DATA_POS = np.flatnonzero(np.isin(OCCUPIED_FFT_INDEX, DATA_FFT_INDEX))
PILOT_POS = np.flatnonzero(np.isin(OCCUPIED_FFT_INDEX, PILOT_FFT_INDEX))


class FrameNotDetected(RuntimeError):
    """Raised by the timing estimator when no preamble correlates above threshold."""


class Equalized(NamedTuple):
    data: np.ndarray  # (..., 48)
    pilots: np.ndarray  # (..., 4)
    unreliable: np.ndarray  # bool, one flag per symbol


# --- timing --------------------------------------------------------------------

def synchronize(rx, method: str = "genie", offset: int = 0, threshold: float = SYNC_THRESHOLD) -> int:
    """Frame start index in ``rx``.

    ``method="genie"`` returns the known ``offset`` unchanged. ``method="sts"``
    finds the short-training plateau by lag-16 autocorrelation, then refines on
    the long-training cross-correlation peak.
    """
    if method == "genie":
        return int(offset)
    if method != "sts":
        raise ValueError(f"unknown sync method {method!r}")
    rx = np.asarray(rx, dtype=complex)
    lag, window = 16, 64
    if rx.size < PREAMBLE_LENGTH:
        raise FrameNotDetected("no frame detected")
    prod = rx[lag:] * np.conj(rx[:-lag])
    energy = np.abs(rx[lag:]) ** 2
    kern = np.ones(window)
    p = np.convolve(prod, kern, mode="valid")
    r = np.convolve(energy, kern, mode="valid")
    metric = np.abs(p) ** 2 / np.maximum(r, 1e-30) ** 2
    above = np.flatnonzero(metric > threshold)
    if above.size == 0:
        raise FrameNotDetected("no frame detected")
    coarse = int(above[0])
    ref = lts_body()
    lo = coarse + 160 + 32 - 48
    hi = min(coarse + 160 + 32 + 160, rx.size - 2 * PHY.fft_size)
    if hi <= max(lo, 0):
        raise FrameNotDetected("no frame detected")
    lo = max(lo, 0)
    seg = rx[lo: hi + 2 * PHY.fft_size]
    xc = np.abs(np.correlate(seg, ref, mode="valid"))
    # two LTS bodies: score each candidate by the pair of peaks 64 apart
    pair = xc[: xc.size - PHY.fft_size] + xc[PHY.fft_size:]
    first_lts = lo + int(np.argmax(pair))
    return first_lts - (PREAMBLE_LENGTH - 2 * PHY.fft_size)


# --- channel estimate / equaliser --------------------------------------------

def estimate_channel(lts_rx) -> np.ndarray:
    """Per-bin gain on the 52 occupied bins from the two received LTS bodies."""
    lts_rx = np.asarray(lts_rx, dtype=complex)
    if lts_rx.size != 2 * PHY.fft_size:
        raise ValueError("expected 128 samples (two LTS bodies)")
    y = np.fft.fft(lts_rx.reshape(2, PHY.fft_size), axis=-1)[:, OCCUPIED_FFT_INDEX]
    return (y[0] + y[1]) / (2 * _LTS_OCCUPIED)


def equalize(symbol_bins, est) -> Equalized:
    """Zero-forcing divide of occupied bins ``(..., 52)`` by the channel estimate."""
    symbol_bins = np.asarray(symbol_bins, dtype=complex)
    est = np.asarray(est, dtype=complex)
    small = np.abs(est) < UNRELIABLE_GAIN
    safe = np.where(small, 1.0, est)
    eq = np.where(small, 0.0, symbol_bins / safe)
    unreliable = np.broadcast_to(small[DATA_POS].any(), eq.shape[:-1]).copy()
    return Equalized(eq[..., DATA_POS], eq[..., PILOT_POS], unreliable)


def ofdm_demodulate(samples, n_symbols: int) -> np.ndarray:
    """CP removal and FFT; returns occupied bins ``(n_symbols, 52)``."""
    sym = np.asarray(samples, dtype=complex)[: n_symbols * PHY.symbol_length]
    sym = sym.reshape(n_symbols, PHY.symbol_length)[:, PHY.cp_length:]
    return np.fft.fft(sym, axis=-1)[:, OCCUPIED_FFT_INDEX]


# --- demapping / deinterleaving / depuncturing -----------------------------------

def demap(points, mode_or_modulation) -> np.ndarray:
    """Hard nearest-point decision; ties go to the smallest bit label."""
    n_bpsc = (
        mode_or_modulation.n_bpsc if isinstance(mode_or_modulation, McsMode)
        else Modulation(mode_or_modulation).n_bpsc
    )
    points = np.asarray(points, dtype=complex).reshape(-1)
    levels = axis_levels(n_bpsc)
    if n_bpsc == 1:
        return _axis_decide(points.real, levels, 1)
    half = n_bpsc // 2
    re_bits = _axis_decide(points.real, levels, half).reshape(-1, half)
    im_bits = _axis_decide(points.imag, levels, half).reshape(-1, half)
    return np.concatenate([re_bits, im_bits], axis=1).reshape(-1)


def _axis_decide(values: np.ndarray, levels: np.ndarray, n_bits: int) -> np.ndarray:
    # levels are indexed by label, so argmin's first-hit rule breaks ties toward the smaller label
    dist = np.abs(values[:, None] - levels[None, :])
    label = np.argmin(dist, axis=1)
    shifts = np.arange(n_bits - 1, -1, -1)
    return ((label[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


def deinterleave(bits, mode: McsMode) -> np.ndarray:
    bits = np.asarray(bits).reshape(-1)
    if bits.size % mode.n_cbps:
        raise ValueError(f"length {bits.size} is not a multiple of N_CBPS={mode.n_cbps}")
    perm = interleaver_permutation(mode.n_cbps, mode.n_bpsc)
    return bits.reshape(-1, mode.n_cbps)[:, perm].reshape(-1)


def depuncture(bits, rate) -> np.ndarray:
    """Reinsert ERASED (-1) marks at punctured positions; returns ``int8``."""
    bits = np.asarray(bits).reshape(-1).astype(np.int8)
    try:
        pattern = PUNCTURE_PATTERNS[Fraction(rate)]
    except KeyError:
        raise ValueError(f"unsupported code rate {rate}") from None
    kept = int(pattern.sum())
    if bits.size % kept:
        raise ValueError(f"length {bits.size} is not a multiple of {kept} kept bits per period")
    periods = bits.size // kept
    out = np.full(periods * pattern.size, ERASED, dtype=np.int8)
    out[np.tile(pattern, periods)] = bits
    return out


def viterbi_decode(coded, terminated: bool = True) -> np.ndarray:
    """ML decode of the K=7 rate-1/2 code; ERASED positions carry no metric."""
    coded = np.asarray(coded).reshape(-1)
    if coded.size % 2:
        raise ValueError("coded length must be even")
    return kernels.viterbi(coded.astype(np.int8), terminated)


# --- frame -----------------------------------------------------------------------

def decode_data_points(points, mode: McsMode) -> np.ndarray:
    """Equalised data points ``(n_symbols, 48)`` -> decoded (still scrambled) DATA bits."""
    coded = deinterleave(demap(points, mode), mode)
    return viterbi_decode(depuncture(coded, mode.code_rate))


def decode_signal_field(signal_samples, est) -> tuple[McsMode | None, int, bool]:
    """Decode a SIGNAL symbol; returns (mode or None, LENGTH octets, parity ok)."""
    bins = ofdm_demodulate(signal_samples, 1)
    eq = equalize(bins, est)
    bpsk = mcs_table()[0]
    word = viterbi_decode(depuncture(deinterleave(demap(eq.data, bpsk), bpsk), Fraction(1, 2)))
    rate = tuple(int(b) for b in word[:4])
    length = int(sum(int(b) << i for i, b in enumerate(word[5:17])))
    parity_ok = int(word[:18].sum()) % 2 == 0
    mode = next((m for m in mcs_table() if m.rate_code == rate), None)
    return mode, length, parity_ok


def receive_frame(
    rx,
    mode: McsMode,
    n_symbols: int,
    payload_bits: int | None = None,
    sync: str = "genie",
    offset: int = 0,
    seed=DEFAULT_SCRAMBLER_SEED,
) -> np.ndarray:
    """Recover payload bits from one received frame.

    ``payload_bits`` defaults to the full capacity of ``n_symbols`` symbols.
    """
    rx = np.asarray(rx, dtype=complex)
    if payload_bits is None:
        payload_bits = payload_capacity(mode, n_symbols)
    start = synchronize(rx, sync, offset)
    lts = rx[start + PREAMBLE_LENGTH - 2 * PHY.fft_size: start + PREAMBLE_LENGTH]
    est = estimate_channel(lts)
    data_start = start + PREAMBLE_LENGTH + SIGNAL_LENGTH
    bins = ofdm_demodulate(rx[data_start:], n_symbols)
    eq = equalize(bins, est)
    scrambled = decode_data_points(eq.data, mode)
    data = descramble(scrambled[: SERVICE_BITS + payload_bits], seed)
    return data[SERVICE_BITS:]
