import numpy as np
import pytest

from oracles import encode_reference
from wave_phy import kernels

needs_numba = pytest.mark.skipif(kernels.numba is None, reason="numba not installed")


def test_encoder_matches_reference(rng):
    bits = rng.integers(0, 2, 500, dtype=np.uint8)
    assert np.array_equal(kernels.conv_encode_numpy(bits), encode_reference(bits))


@needs_numba
def test_encoder_jit_matches_numpy(rng):
    bits = rng.integers(0, 2, 1000, dtype=np.uint8)
    assert np.array_equal(kernels.conv_encode_jit(bits, kernels.TRELLIS_OUT), kernels.conv_encode_numpy(bits))


def test_trellis_table_matches_encoder():
    # state s holds the previous six inputs, most recent in the top bit
    for s in range(kernels.N_STATES):
        history = [(s >> (5 - i)) & 1 for i in range(6)]
        for u in (0, 1):
            reg = [u] + history
            a = sum(g * r for g, r in zip(kernels.GEN_A, reg)) % 2
            b = sum(g * r for g, r in zip(kernels.GEN_B, reg)) % 2
            assert kernels.TRELLIS_OUT[s, u] == (a << 1) | b


@pytest.mark.parametrize("terminated", [True, False])
def test_viterbi_numpy_vs_dispatch(terminated, rng):
    coded = rng.integers(-1, 2, 600).astype(np.int8)
    assert np.array_equal(kernels.viterbi_numpy(coded, terminated), kernels.viterbi(coded, terminated))


@needs_numba
@pytest.mark.parametrize("terminated", [True, False])
def test_viterbi_jit_matches_numpy(terminated, rng):
    for _ in range(20):
        coded = rng.integers(-1, 2, 2 * rng.integers(1, 300)).astype(np.int8)
        assert np.array_equal(
            kernels.viterbi_jit(coded, kernels.TRELLIS_OUT, terminated),
            kernels.viterbi_numpy(coded, terminated),
        )


def test_unterminated_viterbi_noiseless(rng):
    msg = rng.integers(0, 2, 100, dtype=np.uint8)
    assert np.array_equal(kernels.viterbi(encode_reference(msg).astype(np.int8), terminated=False), msg)


def sos_direct(amps, freqs, n, dt):
    t = np.arange(n) * dt
    return np.array([[np.sum(a * np.exp(2j * np.pi * f * ti)) for ti in t] for a, f in zip(amps, freqs)])


def test_sos_numpy_matches_direct(rng):
    amps = rng.standard_normal((2, 8)) + 1j * rng.standard_normal((2, 8))
    freqs = rng.uniform(-300, 300, (2, 8))
    assert np.allclose(kernels.sos_numpy(amps, freqs, 50, 1e-7), sos_direct(amps, freqs, 50, 1e-7))


@needs_numba
def test_sos_jit_matches_numpy(rng):
    amps = rng.standard_normal((3, 64)) + 1j * rng.standard_normal((3, 64))
    freqs = rng.uniform(-1400, 1400, (3, 64))
    # phasor recursion accumulates rounding; long frames stay well inside 1e-9
    got = kernels.sos_jit(amps, freqs, 10_000, 1e-7)
    assert np.allclose(got, kernels.sos_numpy(amps, freqs, 10_000, 1e-7), atol=1e-9)


def test_env_flag_disables_numba(monkeypatch):
    import importlib

    monkeypatch.setenv("WAVE_PHY_NUMBA", "0")
    reloaded = importlib.reload(kernels)
    try:
        assert reloaded.USE_NUMBA is False
    finally:
        monkeypatch.delenv("WAVE_PHY_NUMBA")
        importlib.reload(kernels)
