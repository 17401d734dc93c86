"""Wall-clock comparison of the compiled and numpy kernel paths."""
import time

import numpy as np

from . import _accel
from .cce import CceConfig, cce_backward, cce_forward
from .ccem import ccem_backward, ccem_forward
from .sampler import sample_uniform
from .tensor import Rng


def make_problem(N, V, D, ns, seed=0):
    gen = Rng(seed).generator()
    E = (gen.standard_normal((N, D)) * 0.3).astype(np.float32)
    C = np.asfortranarray((gen.standard_normal((D, V)) * 0.3).astype(np.float32))
    x = gen.integers(0, V, size=N)
    inds = sample_uniform(x, ns, V, Rng(seed).substream(7))
    return E, C, x, inds


def _best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1000.0


def time_ops(E, C, x, inds, repeat=3, cfg=None):
    """Best-of-``repeat`` milliseconds for each fused op on the active path."""
    cfg = cfg or CceConfig()
    out = cce_forward(E, C, x, cfg)
    outm = ccem_forward(E, C, inds, cfg)
    # first call compiles on the numba path
    cce_backward(E, C, x, out.lse, 1.0, cfg)
    ccem_backward(E, C, inds, outm.lse, 1.0, cfg)
    return {
        "cce_forward": _best_of(lambda: cce_forward(E, C, x, cfg), repeat),
        "cce_backward": _best_of(lambda: cce_backward(E, C, x, out.lse, 1.0, cfg), repeat),
        "ccem_forward": _best_of(lambda: ccem_forward(E, C, inds, cfg), repeat),
        "ccem_backward": _best_of(lambda: ccem_backward(E, C, inds, outm.lse, 1.0, cfg), repeat),
    }


def bench_kernels(N=2000, V=50000, D=32, ns=255, repeat=3, seed=0):
    """One record per (path, op) with timings in ``wall_ms``."""
    E, C, x, inds = make_problem(N, V, D, ns, seed)
    paths = [True, False] if _accel.HAS_NUMBA else [False]
    records = []
    for jit in paths:
        with _accel.jit_mode(jit):
            times = time_ops(E, C, x, inds, repeat)
        for op, ms in times.items():
            records.append({"path": "numba" if jit else "numpy", "op": op, "N": N, "V": V,
                            "D": D, "ns": ns, "wall_ms": ms})
    return records
