"""Kernel dispatch: numba when enabled, numpy otherwise (see ``_accel``)."""
from .. import _accel
from . import _numpy

if _accel.HAS_NUMBA:
    from . import _numba
else:  # pragma: no cover
    _numba = None


def impl():
    """Module providing the active kernel implementations."""
    if _accel.jit_enabled():
        _accel.configure_threads()
        return _numba
    return _numpy


def cce_backward(*args):
    """CCE backward on the active path; the compiled path drops to the
    bitwise-equivalent single-pass kernel when only one worker is available."""
    mod = impl()
    if mod is _numba and _accel.numba.get_num_threads() == 1:
        return _numba.cce_backward_serial(*args)
    return mod.cce_backward(*args)


def active_backend():
    return "numba" if _accel.jit_enabled() else "numpy"


__all__ = ["impl", "cce_backward", "active_backend"]
