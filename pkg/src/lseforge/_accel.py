"""Backend switch for the hot kernels.

``LSEFORGE_NO_JIT=1`` forces the pure-numpy path; otherwise numba is used when
importable. ``LSEFORGE_THREADS`` caps the number of numba workers.
"""
import os
from contextlib import contextmanager

try:
    import numba

    # the bundled TBB is too old for numba; try OpenMP first
    if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

_TRUTHY = {"1", "true", "yes", "on"}

_use_jit = HAS_NUMBA and os.environ.get("LSEFORGE_NO_JIT", "").lower() not in _TRUTHY


def jit_enabled():
    return _use_jit


def set_jit(enabled):
    """Select the numba path (True) or the numpy fallback (False)."""
    global _use_jit
    if enabled and not HAS_NUMBA:
        raise RuntimeError("numba is not installed")
    _use_jit = bool(enabled)


@contextmanager
def jit_mode(enabled):
    prev = _use_jit
    set_jit(enabled)
    try:
        yield
    finally:
        set_jit(prev)


def configure_threads():
    """Apply LSEFORGE_THREADS to numba; returns the active worker count."""
    if not HAS_NUMBA:
        return 1
    cap = os.environ.get("LSEFORGE_THREADS")
    if cap:
        n = max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS))
        numba.set_num_threads(n)
    return numba.get_num_threads()
