"""Hot inner loops: convolutional encoding, Viterbi ACS, sum-of-sinusoids fading.

Each kernel has a loop form (compiled with ``numba.njit`` when available) and
a vectorised pure-numpy form. ``WAVE_PHY_NUMBA=0`` in the environment selects
the numpy forms; so does a missing numba install. Both forms are exported so
tests and ``benchmarks/bench_kernels.py`` can compare them directly.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

USE_NUMBA = numba is not None and os.environ.get("WAVE_PHY_NUMBA", "1") not in ("0", "false", "no")

# 802.11 mother code, constraint length 7: octal 133 / 171, MSB = current input.
CONSTRAINT_LENGTH = 7
N_STATES = 1 << (CONSTRAINT_LENGTH - 1)
GEN_A = np.array([1, 0, 1, 1, 0, 1, 1], dtype=np.uint8)
GEN_B = np.array([1, 1, 1, 1, 0, 0, 1], dtype=np.uint8)
ERASED = -1


def _jit(func):
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func


def _trellis_outputs() -> np.ndarray:
    """out[state, u] = 2-bit code symbol (A << 1 | B) for input ``u`` leaving ``state``.

    ``state`` holds the six previous inputs, most recent in the MSB.
    """
    out = np.zeros((N_STATES, 2), dtype=np.int8)
    for s in range(N_STATES):
        past = [(s >> (5 - i)) & 1 for i in range(6)]
        for u in (0, 1):
            window = np.array([u] + past, dtype=np.uint8)
            a = int(window @ GEN_A) & 1
            b = int(window @ GEN_B) & 1
            out[s, u] = (a << 1) | b
    return out


TRELLIS_OUT = _trellis_outputs()


# --- convolutional encoder -------------------------------------------------

def _conv_encode_loop(bits, out_table):
    n = bits.shape[0]
    out = np.empty(2 * n, dtype=np.uint8)
    state = 0
    for i in range(n):
        u = bits[i]
        sym = out_table[state, u]
        out[2 * i] = (sym >> 1) & 1
        out[2 * i + 1] = sym & 1
        state = (u << 5) | (state >> 1)
    return out


conv_encode_jit = _jit(_conv_encode_loop)


def conv_encode_numpy(bits: np.ndarray) -> np.ndarray:
    bits = bits.astype(np.uint8)
    n = bits.size
    a = np.convolve(bits, GEN_A)[:n] & 1
    b = np.convolve(bits, GEN_B)[:n] & 1
    out = np.empty(2 * n, dtype=np.uint8)
    out[0::2] = a
    out[1::2] = b
    return out


def conv_encode(bits: np.ndarray) -> np.ndarray:
    if USE_NUMBA:
        return conv_encode_jit(np.ascontiguousarray(bits, dtype=np.uint8), TRELLIS_OUT)
    return conv_encode_numpy(bits)


# --- Viterbi ------------------------------------------------------------------

def _viterbi_loop(coded, out_table, terminated):
    n = coded.shape[0] // 2
    big = np.int64(1) << 40
    metric = np.full(N_STATES, big, dtype=np.int64)
    metric[0] = 0
    new_metric = np.empty(N_STATES, dtype=np.int64)
    decisions = np.zeros((n, N_STATES), dtype=np.uint8)
    for t in range(n):
        ra = coded[2 * t]
        rb = coded[2 * t + 1]
        for ns in range(N_STATES):
            u = ns >> 5
            p0 = (ns & 31) << 1
            p1 = p0 | 1
            s0 = out_table[p0, u]
            s1 = out_table[p1, u]
            bm0 = 0
            bm1 = 0
            if ra >= 0:
                bm0 += ((s0 >> 1) & 1) != ra
                bm1 += ((s1 >> 1) & 1) != ra
            if rb >= 0:
                bm0 += (s0 & 1) != rb
                bm1 += (s1 & 1) != rb
            m0 = metric[p0] + bm0
            m1 = metric[p1] + bm1
            if m1 < m0:
                new_metric[ns] = m1
                decisions[t, ns] = 1
            else:
                new_metric[ns] = m0
                decisions[t, ns] = 0
        for s in range(N_STATES):
            metric[s] = new_metric[s]
    state = 0
    if not terminated:
        best = metric[0]
        for s in range(1, N_STATES):
            if metric[s] < best:
                best = metric[s]
                state = s
    bits = np.empty(n, dtype=np.uint8)
    for t in range(n - 1, -1, -1):
        bits[t] = state >> 5
        state = ((state & 31) << 1) | decisions[t, state]
    return bits


viterbi_jit = _jit(_viterbi_loop)

_NS = np.arange(N_STATES)
_U = _NS >> 5
_P0 = (_NS & 31) << 1
_P1 = _P0 | 1
_SYM0 = TRELLIS_OUT[_P0, _U]
_SYM1 = TRELLIS_OUT[_P1, _U]


def viterbi_numpy(coded: np.ndarray, terminated: bool = True) -> np.ndarray:
    coded = np.asarray(coded, dtype=np.int8)
    n = coded.size // 2
    pairs = coded[: 2 * n].reshape(n, 2)
    a0, b0 = (_SYM0 >> 1) & 1, _SYM0 & 1
    a1, b1 = (_SYM1 >> 1) & 1, _SYM1 & 1
    metric = np.full(N_STATES, 1 << 40, dtype=np.int64)
    metric[0] = 0
    decisions = np.zeros((n, N_STATES), dtype=np.uint8)
    for t in range(n):
        ra, rb = int(pairs[t, 0]), int(pairs[t, 1])
        bm0 = np.zeros(N_STATES, dtype=np.int64)
        bm1 = np.zeros(N_STATES, dtype=np.int64)
        if ra >= 0:
            bm0 += a0 != ra
            bm1 += a1 != ra
        if rb >= 0:
            bm0 += b0 != rb
            bm1 += b1 != rb
        m0 = metric[_P0] + bm0
        m1 = metric[_P1] + bm1
        pick = m1 < m0
        decisions[t] = pick
        metric = np.where(pick, m1, m0)
    state = 0 if terminated else int(np.argmin(metric))
    bits = np.empty(n, dtype=np.uint8)
    for t in range(n - 1, -1, -1):
        bits[t] = state >> 5
        state = ((state & 31) << 1) | int(decisions[t, state])
    return bits


def viterbi(coded: np.ndarray, terminated: bool = True) -> np.ndarray:
    if USE_NUMBA:
        return viterbi_jit(np.ascontiguousarray(coded, dtype=np.int8), TRELLIS_OUT, terminated)
    return viterbi_numpy(coded, terminated)


# --- sum-of-sinusoids fading -------------------------------------------------

def _sos_loop(amplitudes, doppler_freqs, n_samples, dt):
    n_real, n_sin = amplitudes.shape
    out = np.zeros((n_real, n_samples), dtype=np.complex128)
    for r in range(n_real):
        for k in range(n_sin):
            phasor = amplitudes[r, k]
            w = 2.0 * np.pi * doppler_freqs[r, k] * dt
            step = np.cos(w) + 1j * np.sin(w)
            for i in range(n_samples):
                out[r, i] += phasor
                phasor *= step
    return out


sos_jit = _jit(_sos_loop)


def sos_numpy(amplitudes: np.ndarray, doppler_freqs: np.ndarray, n_samples: int, dt: float) -> np.ndarray:
    t = np.arange(n_samples) * dt
    out = np.empty((amplitudes.shape[0], n_samples), dtype=np.complex128)
    # bound the (realisations, sinusoids, samples) temporary to a few million entries
    step = max(1, (1 << 22) // max(1, amplitudes.shape[1] * n_samples))
    for r in range(0, amplitudes.shape[0], step):
        phase = 2.0 * np.pi * doppler_freqs[r:r + step, :, None] * t[None, None, :]
        out[r:r + step] = np.einsum("rk,rkn->rn", amplitudes[r:r + step], np.exp(1j * phase))
    return out


def sum_of_sinusoids(amplitudes: np.ndarray, doppler_freqs: np.ndarray, n_samples: int, dt: float) -> np.ndarray:
    """Evaluate ``sum_k a[r,k] exp(j 2 pi f[r,k] i dt)`` for ``i < n_samples``, every realisation ``r``."""
    if USE_NUMBA:
        return sos_jit(
            np.ascontiguousarray(amplitudes, dtype=np.complex128),
            np.ascontiguousarray(doppler_freqs, dtype=np.float64),
            int(n_samples),
            float(dt),
        )
    return sos_numpy(amplitudes, doppler_freqs, n_samples, dt)
