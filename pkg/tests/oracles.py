"""Independent reference implementations used by the tests."""
import itertools

import numpy as np

GEN_A = (1, 0, 1, 1, 0, 1, 1)
GEN_B = (1, 1, 1, 1, 0, 0, 1)


def encode_reference(bits) -> np.ndarray:
    """Shift-register encoder written out longhand; zero initial state."""
    reg = [0] * 7
    out = []
    for b in bits:
        reg = [int(b)] + reg[:-1]
        out.append(sum(g * r for g, r in zip(GEN_A, reg)) % 2)
        out.append(sum(g * r for g, r in zip(GEN_B, reg)) % 2)
    return np.array(out, dtype=np.uint8)


def codebook(n_msg: int) -> tuple[np.ndarray, np.ndarray]:
    """All messages of ``n_msg`` bits and their terminated codewords."""
    msgs = np.array(list(itertools.product((0, 1), repeat=n_msg)), dtype=np.uint8).reshape(-1, n_msg)
    words = np.array([encode_reference(np.r_[m, np.zeros(6, dtype=np.uint8)]) for m in msgs])
    return msgs, words


def ml_decode(received, msgs, words):
    """Exhaustive minimum-Hamming decode, ignoring erased (negative) positions.

    Returns the winning message, or None when the minimum is shared.
    """
    received = np.asarray(received)
    live = received >= 0
    dist = np.sum((words != received) & live, axis=1)
    best = np.flatnonzero(dist == dist.min())
    return None if best.size > 1 else msgs[best[0]]
