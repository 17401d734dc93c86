"""Fused linear-log-sum-exp restricted to per-row sampled item sets.

Forward: for each row block, walk the 1 + ns slots of the index matrix, load
the indexed classifier rows, take the dot products and fold them into a
running (max, sum) pair. Only the positive logits and the LSE vector leave
the kernel.

Backward: recompute the per-slot logits, turn them into softmax weights with
the stored LSE, subtract 1 at slot 0 (the positive item), then update the
embedding gradient row-wise and scatter-add into the sampled classifier
columns.

No gradient filtering is applied here; it would slot in right after the
softmax weights are formed.
"""
import numpy as np

from . import kernels
from .backend import Backend, parse_backend
from .cce import CceConfig, classifier_rows
from .memory import INDEX, RETAINED, SCRATCH, ccem_scratch_scalars
from .tensor import as_matrix
from .types import (GradPair, LossOutput, NegIndexMatrix, as_index_matrix,
                    check_pair, grad_dtype, row_weights)

__all__ = ["NegIndexMatrix", "ccem_forward", "ccem_backward", "estimate_flops"]


def _prepare(E, C, inds):
    E, C = as_matrix(E, "E"), as_matrix(C, "C")
    check_pair(E, C)
    inds = as_index_matrix(inds, C.shape[1])
    if inds.rows != E.shape[0]:
        raise ValueError(f"E has {E.shape[0]} rows but the index matrix has {inds.rows}")
    return E, C, inds


def ccem_forward(E, C, inds, cfg=None, accountant=None):
    cfg = cfg or CceConfig()
    E, C, inds = _prepare(E, C, inds)
    N, D = E.shape
    if accountant is not None:
        accountant.alloc("ccem.pos_logits", N, RETAINED)
        accountant.alloc("ccem.lse", N, RETAINED)
        accountant.alloc("ccem.inds", N * inds.width, INDEX)
        accountant.alloc("ccem.gather", ccem_scratch_scalars(N, D, cfg.row_block), SCRATCH)
    pos, lse = kernels.impl().ccem_forward(E, classifier_rows(C), inds.idx, cfg.row_block)
    if accountant is not None:
        accountant.free("ccem.gather")
    return LossOutput(float(-np.mean(pos - lse)), pos, lse)


def ccem_backward(E, C, inds, lse, upstream=1.0, cfg=None, accountant=None):
    """Gradients of the sampled loss; ``d_classifier`` is zero outside ``inds``.

    ``upstream`` is a scalar (mean reduction) or a per-row weight vector.
    """
    cfg = cfg or CceConfig()
    E, C, inds = _prepare(E, C, inds)
    N, D = E.shape
    lse = np.asarray(lse, dtype=np.float64)
    if lse.shape != (N,):
        raise ValueError(f"lse has shape {lse.shape}, expected ({N},)")
    w = row_weights(upstream, N)
    if accountant is not None:
        accountant.alloc("ccem.gather", ccem_scratch_scalars(N, D, cfg.row_block), SCRATCH)
    dE, dCt = kernels.impl().ccem_backward(E, classifier_rows(C), inds.idx, lse, w, cfg.row_block)
    if accountant is not None:
        accountant.free("ccem.gather")
    dt = grad_dtype(E, C)
    return GradPair(dE.astype(dt, copy=False), dCt.T.astype(dt, copy=False))


def estimate_flops(N, D, V, ns=0, backend=Backend.CCE, phase="forward"):
    """Multiply count of the loss layer.

    Forward: ``N*D*V`` for CE/CCE, ``N*D*(1+ns)`` for the sampled kernel.
    Backward: CE reuses its stored logits and needs the two gradient products
    (2x forward); the fused kernels also recompute the logits (3x forward).
    ``phase`` is ``"forward"``, ``"backward"`` or ``"total"``.
    """
    backend = parse_backend(backend)
    if min(N, D, V) < 1 or ns < 0:
        raise ValueError("N, D, V must be >= 1 and ns >= 0")
    if backend in (Backend.CE, Backend.CCE):
        fwd = N * D * V
    elif backend in (Backend.CCE_MINUS, Backend.CE_MINUS):
        fwd = N * D * (1 + ns)
    else:
        fwd = 2 * N * D
    bwd = (2 if backend in (Backend.CE, Backend.CE_MINUS, Backend.BCE) else 3) * fwd
    if phase == "forward":
        return fwd
    if phase == "backward":
        return bwd
    if phase == "total":
        return fwd + bwd
    raise ValueError(f"unknown phase {phase!r}")
