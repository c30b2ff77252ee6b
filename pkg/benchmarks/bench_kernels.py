"""Time the numba kernels against their pure-numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel is checked for agreement before timing; compile time is excluded
by a warm-up call.
"""
import argparse
import timeit

import numpy as np

from wave_phy import kernels
from wave_phy.channel import N_SINUSOIDS
from wave_phy.numerology import PHY


def cases(rng):
    bits = rng.integers(0, 2, 30 * 24, dtype=np.uint8)
    coded = kernels.conv_encode_numpy(bits).astype(np.int8)
    coded[rng.random(coded.size) < 0.05] ^= 1
    amps = (rng.standard_normal((1, N_SINUSOIDS)) + 1j * rng.standard_normal((1, N_SINUSOIDS))) / 8
    freqs = 273.3 * np.cos(rng.uniform(0, 2 * np.pi, (1, N_SINUSOIDS)))
    n = 400 + 30 * 80
    dt = 1 / PHY.sample_rate
    return {
        "conv_encode (720 bits)": (
            lambda: kernels.conv_encode_numpy(bits),
            lambda: kernels.conv_encode_jit(bits, kernels.TRELLIS_OUT),
        ),
        "viterbi (720 bits)": (
            lambda: kernels.viterbi_numpy(coded),
            lambda: kernels.viterbi_jit(coded, kernels.TRELLIS_OUT, True),
        ),
        "sum_of_sinusoids (2800 samples)": (
            lambda: kernels.sos_numpy(amps, freqs, n, dt),
            lambda: kernels.sos_jit(amps, freqs, n, dt),
        ),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if kernels.numba is None:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<34}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, (ref, fast) in cases(rng).items():
        assert np.allclose(ref(), fast(), atol=1e-9), name
        number = 20
        t_ref = min(timeit.repeat(ref, number=number, repeat=args.repeat)) / number * 1e3
        t_fast = min(timeit.repeat(fast, number=number, repeat=args.repeat)) / number * 1e3
        print(f"{name:<34}{t_ref:>10.3f}{t_fast:>10.3f}{t_ref / t_fast:>8.1f}x")


if __name__ == "__main__":
    main()
