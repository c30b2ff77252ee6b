"""Flat vehicular channels: AWGN, Rayleigh and Rician fading with speed-derived Doppler.

Fading gains come from a sum of 64 sinusoids whose complex amplitudes are
i.i.d. CN(0, 1/64) and whose arrival angles are uniform, so every realisation
has an exactly complex-Gaussian marginal and the ensemble autocorrelation is
J0(2 pi f_d tau).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import kernels
from .numerology import PHY

SPEED_OF_LIGHT = 299_792_458.0
N_SINUSOIDS = 64
DEFAULT_RICIAN_K_DB = 6.0


class ChannelFamily(str, Enum):
    AWGN = "AWGN"
    RAYLEIGH = "Rayleigh"
    RICIAN = "Rician"

    @classmethod
    def parse(cls, name) -> "ChannelFamily":
        if isinstance(name, cls):
            return name
        for fam in cls:
            if fam.value.lower() == str(name).strip().lower():
                return fam
        raise ValueError(f"unknown channel family {name!r}; valid: {[f.value for f in cls]}")


@dataclass(frozen=True)
class ChannelScenario:
    family: ChannelFamily = ChannelFamily.AWGN
    snr_db: float = 10.0
    speed: float = 0.0  # km/h
    rician_k_db: float = DEFAULT_RICIAN_K_DB
    carrier_frequency: float = PHY.carrier_frequency
    seed: int | np.random.SeedSequence | np.random.Generator | None = 0

    def __post_init__(self):
        object.__setattr__(self, "family", ChannelFamily.parse(self.family))
        if not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if self.speed < 0:
            raise ValueError("speed must be >= 0")

    @property
    def doppler_hz(self) -> float:
        return doppler_shift(self.speed, self.carrier_frequency)

    def with_seed(self, seed) -> "ChannelScenario":
        return replace(self, seed=seed)


@dataclass
class FadingRealization:
    gains: np.ndarray
    doppler_hz: float

    def __len__(self) -> int:
        return self.gains.size


def doppler_shift(speed: float, carrier_frequency: float = PHY.carrier_frequency) -> float:
    """Maximum Doppler shift in Hz for a speed in km/h."""
    if speed < 0:
        raise ValueError("speed must be >= 0")
    return (speed / 3.6) * carrier_frequency / SPEED_OF_LIGHT


def signal_power(x: np.ndarray) -> float:
    """Mean power over the non-zero samples; 1.0 for an all-zero input."""
    p = np.abs(np.asarray(x)) ** 2
    occupied = p[p > 0]
    return float(occupied.mean()) if occupied.size else 1.0


def apply_awgn(x, snr_db: float, seed=None, power: float | None = None) -> np.ndarray:
    """Add CN(0, N0) noise with N0 = P_sig / 10^(snr_db/10).

    ``power`` overrides the measured signal power (used to keep the *average*
    SNR fixed after fading).
    """
    x = np.asarray(x, dtype=complex)
    if x.size == 0:
        raise ValueError("input stream is empty")
    rng = np.random.default_rng(seed)
    p_sig = signal_power(x) if power is None else power
    n0 = p_sig / 10 ** (snr_db / 10)
    noise = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
    return x + noise * np.sqrt(n0 / 2)


def fading_gains(
    family,
    n_samples: int,
    doppler_hz: float,
    rician_k_db: float = DEFAULT_RICIAN_K_DB,
    seed=None,
    n_realizations: int = 1,
) -> np.ndarray:
    """Independent fading realisations as an ``(n_realizations, n_samples)`` array."""
    family = ChannelFamily.parse(family)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if doppler_hz < 0:
        raise ValueError("doppler_hz must be >= 0")
    if family is ChannelFamily.AWGN:
        return np.ones((n_realizations, n_samples), dtype=complex)
    rng = np.random.default_rng(seed)
    shape = (n_realizations, N_SINUSOIDS)
    amps = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5 / N_SINUSOIDS)
    angles = rng.uniform(0.0, 2 * np.pi, shape)
    dt = 1.0 / PHY.sample_rate
    if doppler_hz == 0.0:
        diffuse = np.repeat(amps.sum(axis=1, keepdims=True), n_samples, axis=1)
    else:
        diffuse = kernels.sum_of_sinusoids(amps, doppler_hz * np.cos(angles), n_samples, dt)
    if family is ChannelFamily.RAYLEIGH:
        return diffuse
    k = 10 ** (rician_k_db / 10)
    los_phase = rng.uniform(0.0, 2 * np.pi, (n_realizations, 1))
    t = np.arange(n_samples) * dt
    los = np.exp(1j * (2 * np.pi * doppler_hz * t + los_phase))
    return np.sqrt(k / (k + 1)) * los + np.sqrt(1 / (k + 1)) * diffuse


def make_fading(family, n_samples: int, doppler_hz: float, rician_k_db: float = DEFAULT_RICIAN_K_DB,
                seed=None) -> FadingRealization:
    gains = fading_gains(family, n_samples, doppler_hz, rician_k_db, seed)[0]
    return FadingRealization(gains=gains, doppler_hz=doppler_hz)


def apply_channel(x, scenario: ChannelScenario, return_gains: bool = False):
    """Fade (unless AWGN) then add noise at the scenario's average SNR.

    The fading and noise draws come from two children of the scenario seed, so
    the same scenario and input always give the same output.
    """
    x = np.asarray(x, dtype=complex)
    fade_seed, noise_seed = np.random.SeedSequence(_entropy(scenario.seed)).spawn(2)
    if scenario.family is ChannelFamily.AWGN:
        gains = np.ones(x.shape, dtype=complex)
        y = apply_awgn(x, scenario.snr_db, noise_seed)
    else:
        gains = make_fading(scenario.family, x.size, scenario.doppler_hz, scenario.rician_k_db, fade_seed).gains
        # unit mean fading power: average SNR is set by the unfaded input power
        y = apply_awgn(gains * x, scenario.snr_db, noise_seed, power=signal_power(x))
    return (y, gains) if return_gains else y


def _entropy(seed):
    # never spawn from a caller's SeedSequence: spawning mutates it
    if isinstance(seed, np.random.SeedSequence):
        return seed.generate_state(4)
    if isinstance(seed, np.random.Generator):
        return seed.integers(0, 2**63, size=4)
    return seed
