"""Blockwise fused linear-log-sum-exp over the full catalog.

The forward pass streams the classifier in column tiles and keeps only the
positive logits and the LSE vector. The backward pass recomputes every tile
from ``E``, ``C`` and the stored LSE, optionally dropping softmax entries that
fall below ``filter_eps``.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .memory import (RETAINED, SCRATCH, cce_backward_scratch_scalars,
                     cce_scratch_scalars)
from .tensor import as_matrix
from .types import (GradPair, LossOutput, check_pair, check_targets,
                    grad_dtype, row_weights)

FP16_MIN_SUBNORMAL = 6e-8


@dataclass(frozen=True)
class CceConfig:
    row_block: int = 128
    col_block: int = 256
    filter_eps: float = 0.0

    def __post_init__(self):
        if self.row_block < 1 or self.col_block < 1:
            raise ValueError("row_block and col_block must be >= 1")
        if not self.filter_eps >= 0.0:
            raise ValueError("filter_eps must be >= 0")

    @classmethod
    def fp16_filtered(cls, **kw):
        """Filtering at the smallest positive fp16 value."""
        return cls(filter_eps=FP16_MIN_SUBNORMAL, **kw)


def classifier_rows(C):
    """V x D view of the D x V classifier (free when C is column-major)."""
    return C.T


def _prepare(E, C, x):
    E, C = as_matrix(E, "E"), as_matrix(C, "C")
    check_pair(E, C)
    x = check_targets(x, E.shape[0], C.shape[1])
    return E, C, x


def cce_forward(E, C, x, cfg=None, accountant=None):
    cfg = cfg or CceConfig()
    E, C, x = _prepare(E, C, x)
    N, D = E.shape
    V = C.shape[1]
    if accountant is not None:
        accountant.alloc("cce.pos_logits", N, RETAINED)
        accountant.alloc("cce.lse", N, RETAINED)
        accountant.alloc("cce.tile", cce_scratch_scalars(N, V, D, cfg.row_block, cfg.col_block), SCRATCH)
    pos, lse = kernels.impl().cce_forward(E, classifier_rows(C), x, cfg.row_block, cfg.col_block)
    if accountant is not None:
        accountant.free("cce.tile")
    return LossOutput(float(-np.mean(pos - lse)), pos, lse)


def cce_backward(E, C, x, lse, upstream=1.0, cfg=None, accountant=None):
    """Gradients of the mean CE loss, recomputing logits tile by tile.

    With ``cfg.filter_eps > 0`` every off-target softmax entry below the
    threshold is treated as zero. The positive item's term is always kept.
    ``skipped_fraction`` is the share of off-target (row, item) pairs dropped.
    """
    cfg = cfg or CceConfig()
    E, C, x = _prepare(E, C, x)
    N, D = E.shape
    V = C.shape[1]
    lse = np.asarray(lse, dtype=np.float64)
    if lse.shape != (N,):
        raise ValueError(f"lse has shape {lse.shape}, expected ({N},)")
    w = row_weights(upstream, N)
    if accountant is not None:
        accountant.alloc("cce.tile", cce_backward_scratch_scalars(N, V, D, cfg.row_block, cfg.col_block),
                         SCRATCH)
    dE, dCt, skipped = kernels.cce_backward(
        E, classifier_rows(C), x, lse, w, cfg.row_block, cfg.col_block, float(cfg.filter_eps))
    if accountant is not None:
        accountant.free("cce.tile")
    off_target = N * (V - 1)
    frac = float(skipped) / off_target if off_target else 0.0
    dt = grad_dtype(E, C)
    return GradPair(dE.astype(dt, copy=False), dCt.T.astype(dt, copy=False), frac)
