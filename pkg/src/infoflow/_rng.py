"""Platform-stable random streams.

Only the PCG64 bit stream and ``SeedSequence`` hashing are relied upon; both are
stable across numpy releases, unlike the higher-level ``Generator`` methods.
Derived quantities (bounded integers, uniforms, normals) are computed here.
"""
import math

import numpy as np

_MASK64 = (1 << 64) - 1
_TWO_POW_64 = 1 << 64


def stream(seed, index):
    """PCG64 bit generator for sub-stream ``index`` of ``seed``.

    The child state is ``SeedSequence(seed, spawn_key=(index,))``, i.e. the same
    stream ``SeedSequence(seed).spawn(...)[index]`` would give.
    """
    if seed < 0 or index < 0:
        raise ValueError("seed and stream index must be non-negative")
    return np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,)))


def bounded(bitgen, bound):
    """Uniform integer in ``[0, bound)`` by Lemire's multiply-and-reject."""
    s = bound
    w = int(bitgen.random_raw())
    m = w * s
    low = m & _MASK64
    if low < s:
        threshold = (_TWO_POW_64 - s) % s
        while low < threshold:
            w = int(bitgen.random_raw())
            m = w * s
            low = m & _MASK64
    return m >> 64


def permutation(bitgen, n):
    """Uniform permutation of ``range(n)`` (Fisher-Yates, top-down)."""
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = bounded(bitgen, i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return np.array(perm, dtype=np.intp)


def standard_normal(bitgen, size):
    """Box-Muller normals, one per pair of 64-bit words (cosine branch only)."""
    raw = bitgen.random_raw(2 * size).reshape(size, 2)
    u1 = ((raw[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u2 = (raw[:, 1] >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)
