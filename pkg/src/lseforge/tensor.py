"""Dense matrices, stable log-sum-exp primitives and the seeded generator.

Matrices are plain row-major numpy arrays (float32 storage by default, float64
accepted everywhere). Every reduction here accumulates in float64.
"""
import math

import numpy as np

STORAGE_DTYPE = np.float32
ACCUM_DTYPE = np.float64

_M64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MUL1 = 0xBF58476D1CE4E5B9
MIX_MUL2 = 0x94D049BB133111EB


def as_matrix(a, name="matrix"):
    """Validate a 2-D real array; returns it unchanged when already float32/64."""
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if a.dtype not in (np.float32, np.float64):
        a = a.astype(ACCUM_DTYPE)
    return a


def check_finite(a, name="matrix"):
    if not np.all(np.isfinite(a)):
        raise FloatingPointError(f"{name} contains non-finite entries")
    return a


def matmul_block(a, b):
    """Exact dense product of two 2-D views, accumulated in float64."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"inner dimensions disagree: {a.shape} x {b.shape}")
    return a.astype(ACCUM_DTYPE, copy=False) @ b.astype(ACCUM_DTYPE, copy=False)


def logsumexp_row(values):
    """Max-shifted ``log(sum(exp(values)))`` of a non-empty 1-D array."""
    v = np.asarray(values, dtype=ACCUM_DTYPE).ravel()
    if v.size == 0:
        raise ValueError("logsumexp of an empty array")
    m = v.max()
    return float(m + np.log(np.exp(v - m).sum()))


def online_lse_update(state, o):
    """Fold one value into a running ``(max, scaled_sum)`` pair.

    Start from ``(-inf, 0.0)``; after any sequence of updates
    ``m + log(d)`` equals the log-sum-exp of everything consumed.
    """
    m, d = state
    m_new = max(m, o)
    if m_new == -math.inf:
        return m_new, d
    d = d * math.exp(m - m_new) + math.exp(o - m_new)
    return m_new, d


def mix64(z):
    """SplitMix64 finalizer over uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_MUL1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_MUL2)
    return z ^ (z >> np.uint64(31))


class Rng:
    """Counter-based SplitMix64 generator.

    Output ``k`` of a stream keyed by ``key`` is ``mix64(key + (k + 1) * GAMMA)``
    with ``GAMMA = 0x9E3779B97F4A7C15`` and the finalizer constants
    ``0xBF58476D1CE4E5B9`` / ``0x94D049BB133111EB`` (Steele, Lea & Flood 2014).
    For the root stream ``key == seed``, so ``Rng(s).bits(range(n))`` is exactly
    the first ``n`` outputs of the sequential SplitMix64 seeded with ``s``.
    Sub-streams fold extra integer keys into the key; because every draw is a
    pure function of (key, counter), results do not depend on evaluation order
    or worker count.
    """

    def __init__(self, seed=0):
        self.seed = int(seed) & _M64
        self.key = self.seed

    def substream(self, *keys):
        child = Rng(self.seed)
        k = self.key
        for extra in keys:
            k = int(mix64(np.uint64((k + (int(extra) + 1) * GOLDEN_GAMMA) & _M64)))
        child.key = k
        return child

    def row_keys(self, rows):
        """Per-row sub-stream keys, vectorised over an index array."""
        rows = np.asarray(rows, dtype=np.uint64)
        base = np.uint64(self.key)
        with np.errstate(over="ignore"):
            return mix64(base + (rows + np.uint64(1)) * np.uint64(GOLDEN_GAMMA))

    def bits(self, counters, keys=None):
        c = np.asarray(counters, dtype=np.uint64)
        k = np.uint64(self.key) if keys is None else np.asarray(keys, dtype=np.uint64)
        with np.errstate(over="ignore"):
            return mix64(k + (c + np.uint64(1)) * np.uint64(GOLDEN_GAMMA))

    def uniform(self, counters, keys=None):
        """Doubles in [0, 1) from the top 53 bits of each output."""
        return (self.bits(counters, keys) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def generator(self):
        """numpy PCG64 generator seeded from this stream (for bulk draws)."""
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.key & 0xFFFFFFFF, self.key >> 32])))
