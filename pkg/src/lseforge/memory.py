"""Logical peak-memory accounting for the loss layer.

Two complementary views:

* :func:`peak_bytes` predicts retained/scratch bytes from closed forms.
* :class:`MemoryAccountant` is fed by the kernels at run time
  (``alloc``/``free`` per buffer) and reports observed peaks.

Counts are logical scalars, not process RSS. Float buffers are converted to
bytes with the configured storage width; index buffers are always 8 bytes
per entry.
"""
from dataclasses import dataclass

from .backend import Backend, parse_backend

INDEX_BYTES = 8

RETAINED = "retained"
SCRATCH = "scratch"
INDEX = "index"


class AccountingError(RuntimeError):
    pass


class MemoryAccountant:
    """Tracks live buffers by tag and records time-peaks.

    ``kind`` is one of ``retained`` (loss-layer state that persists from the
    forward to the backward pass), ``scratch`` (per-tile working buffers) or
    ``index`` (integer matrices kept for the backward pass, 8 bytes/entry).
    """

    def __init__(self, dtype_bytes=4):
        self.dtype_bytes = dtype_bytes
        self._live = {}
        self._tag_peak = {}
        self._live_totals = {RETAINED: 0, SCRATCH: 0, INDEX: 0}
        self._peaks = {RETAINED: 0, SCRATCH: 0, INDEX: 0}
        self._peak_retained_bytes = 0

    def alloc(self, tag, scalars, kind=SCRATCH):
        if kind not in self._live_totals:
            raise ValueError(f"unknown buffer kind {kind!r}")
        if tag in self._live:
            raise AccountingError(f"buffer {tag!r} allocated twice without free")
        scalars = int(scalars)
        self._live[tag] = (kind, scalars)
        self._tag_peak[tag] = max(self._tag_peak.get(tag, 0), scalars)
        self._live_totals[kind] += scalars
        for k, v in self._live_totals.items():
            self._peaks[k] = max(self._peaks[k], v)
        self._peak_retained_bytes = max(self._peak_retained_bytes, self._retained_bytes_now())

    # alias used by the kernels
    record_alloc = alloc

    def free(self, tag):
        try:
            kind, scalars = self._live.pop(tag)
        except KeyError:
            raise AccountingError(f"free of unknown buffer {tag!r}") from None
        self._live_totals[kind] -= scalars

    def free_all(self, kind=None):
        for tag in [t for t, (k, _) in self._live.items() if kind is None or k == kind]:
            self.free(tag)

    def check_balanced(self):
        if self._live:
            raise AccountingError(f"unfreed buffers: {sorted(self._live)}")

    def _retained_bytes_now(self):
        return (self._live_totals[RETAINED] * self.dtype_bytes
                + self._live_totals[INDEX] * INDEX_BYTES)

    def report(self):
        return {
            "retained_scalars": self._peaks[RETAINED],
            "scratch_scalars": self._peaks[SCRATCH],
            "index_entries": self._peaks[INDEX],
            "retained_bytes": self._peak_retained_bytes,
            "scratch_bytes": self._peaks[SCRATCH] * self.dtype_bytes,
            "tags": dict(self._tag_peak),
        }


@dataclass
class MemoryModel:
    backend: Backend
    N: int
    V: int
    D: int
    ns: int = None
    dtype_bytes: int = 4
    row_block: int = 128
    col_block: int = 256

    def __post_init__(self):
        self.backend = parse_backend(self.backend)
        for name in ("N", "V", "D", "row_block", "col_block"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.dtype_bytes not in (2, 4, 8):
            raise ValueError("dtype_bytes must be 2, 4 or 8")
        if self.backend.takes_ns:
            if self.ns is None or self.ns < 0:
                raise ValueError(f"{self.backend.value} needs ns >= 0")
        elif self.ns is not None and not (self.backend is Backend.BCE and self.ns == 1):
            raise ValueError(f"{self.backend.value} does not take ns")


def cce_scratch_scalars(N, V, D, row_block, col_block):
    """Tile logits + float64 copies of one E row block and one C column slice.

    The running (max, sum) pair lives in the output LSE / positive-logit
    slots, so it adds nothing here.
    """
    rb, cb = min(row_block, N), min(col_block, V)
    return rb * cb + rb * D + cb * D


def cce_backward_scratch_scalars(N, V, D, row_block, col_block):
    """Forward tile set plus the temporary of one tile-gradient product."""
    rb, cb = min(row_block, N), min(col_block, V)
    return cce_scratch_scalars(N, V, D, row_block, col_block) + max(rb, cb) * D


def ccem_scratch_scalars(N, D, row_block):
    """Gathered C rows for one row block + running max, sum and logit vectors."""
    rb = min(row_block, N)
    return rb * (D + 3)


def peak_scalars(model):
    """Predicted (retained_float_scalars, index_entries, scratch_scalars)."""
    b, N, V, D = model.backend, model.N, model.V, model.D
    if b is Backend.CE:
        return N * V + N, 0, N * V
    if b is Backend.CCE:
        return 2 * N, 0, cce_backward_scratch_scalars(N, V, D, model.row_block, model.col_block)
    width = 1 + (model.ns or 0)
    if b is Backend.CE_MINUS:
        return N * width + N, N * width, N * width
    if b is Backend.CCE_MINUS:
        return 2 * N, N * width, ccem_scratch_scalars(N, D, model.row_block)
    if b is Backend.BCE:
        return 2 * N, N, 0
    raise ValueError(b)


def peak_bytes(model):
    """Closed-form loss-layer footprint in bytes: ``{"retained", "scratch"}``.

    CE keeps the N x V logits plus the LSE vector; the fused kernels keep only
    the positive logits and LSE (2N) and, for the sampled variant, the index
    matrix. Scratch is one tile's worth of working buffers.
    """
    retained, index, scratch = peak_scalars(model)
    return {
        "retained": retained * model.dtype_bytes + index * INDEX_BYTES,
        "scratch": scratch * model.dtype_bytes,
    }
