"""Shared builders and independent reference computations for the tests."""
import math

import numpy as np

from lseforge.sampler import sample_uniform
from lseforge.tensor import Rng

M64 = (1 << 64) - 1


def splitmix64_sequence(seed, n):
    """Textbook sequential SplitMix64 in plain Python integers."""
    state = seed & M64
    out = []
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & M64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
        out.append(z ^ (z >> 31))
    return out


def instance(seed, N, D, V, scale=1.0, dtype=np.float64):
    gen = np.random.default_rng(seed)
    E = (gen.standard_normal((N, D)) * scale).astype(dtype)
    C = np.asfortranarray((gen.standard_normal((D, V)) * scale).astype(dtype))
    x = gen.integers(0, V, size=N)
    return E, C, x


def sampled_instance(seed, N, D, V, ns, scale=1.0, dtype=np.float64):
    E, C, x = instance(seed, N, D, V, scale, dtype)
    inds = sample_uniform(x, ns, V, Rng(seed).substream(99))
    return E, C, x, inds


def full_catalog_inds(x, V):
    """Index matrix whose row i is x_i followed by every other item."""
    rows = []
    for xi in x:
        rest = [v for v in range(V) if v != xi]
        rows.append([xi] + rest)
    return np.array(rows, dtype=np.int64)


def naive_ce(E, C, x):
    """Per-row softmax cross-entropy with Python loops, float64."""
    total = 0.0
    for i in range(E.shape[0]):
        logits = [float(np.dot(E[i], C[:, v])) for v in range(C.shape[1])]
        m = max(logits)
        lse = m + math.log(sum(math.exp(o - m) for o in logits))
        total += lse - logits[x[i]]
    return total / E.shape[0]


def central_diff(f, arr, h=1e-4):
    """Central differences of scalar ``f()`` w.r.t. every entry of ``arr`` (mutated in place)."""
    g = np.zeros(arr.shape)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        k = it.multi_index
        old = arr[k]
        arr[k] = old + h
        up = f()
        arr[k] = old - h
        down = f()
        arr[k] = old
        g[k] = (up - down) / (2 * h)
    return g


def rel_err(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.abs(b).max(), 1e-300)
    return float(np.abs(a - b).max() / denom)
