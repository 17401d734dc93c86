"""Reference losses that materialize logits: full CE, sampled CE and BCE.

These are deliberately naive and memory-hungry; the fused kernels are tested
against them.
"""
import numpy as np

from .memory import INDEX, RETAINED, SCRATCH
from .tensor import as_matrix
from .types import (GradPair, LossOutput, as_index_matrix, check_pair,
                    check_targets, grad_dtype, row_weights)


def _softmax_rows(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(z)
    return p / p.sum(axis=1, keepdims=True)


def _lse_rows(logits):
    m = logits.max(axis=1)
    return m + np.log(np.exp(logits - m[:, None]).sum(axis=1))


def _logits(E, C):
    return E.astype(np.float64) @ C.astype(np.float64)


def ce_full_forward(E, C, x, accountant=None):
    E, C = as_matrix(E, "E"), as_matrix(C, "C")
    check_pair(E, C)
    N, V = E.shape[0], C.shape[1]
    x = check_targets(x, N, V)
    logits = _logits(E, C)
    lse = _lse_rows(logits)
    pos = logits[np.arange(N), x]
    if accountant is not None:
        accountant.alloc("ce.logits", N * V, RETAINED)
        accountant.alloc("ce.lse", N, RETAINED)
    return LossOutput(float(-np.mean(pos - lse)), pos, lse)


def ce_full_backward(E, C, x, upstream=1.0, accountant=None):
    E, C = as_matrix(E, "E"), as_matrix(C, "C")
    check_pair(E, C)
    N, V = E.shape[0], C.shape[1]
    x = check_targets(x, N, V)
    w = row_weights(upstream, N)
    if accountant is not None:
        accountant.alloc("ce.dlogits", N * V, SCRATCH)
    G = _softmax_rows(_logits(E, C))
    G[np.arange(N), x] -= 1.0
    G *= w[:, None]
    dE = G @ C.astype(np.float64).T
    dC = E.astype(np.float64).T @ G
    if accountant is not None:
        accountant.free("ce.dlogits")
    dt = grad_dtype(E, C)
    return GradPair(dE.astype(dt), dC.astype(dt))


def _sampled_logits(E, C, idx):
    Cf = C.astype(np.float64)
    Ef = E.astype(np.float64)
    # gather-then-dot: row i, slot j -> E_i . C[:, idx[i, j]]
    return np.einsum("nd,dnk->nk", Ef, Cf[:, idx])


def _check_sampled(E, C, inds):
    E, C = as_matrix(E, "E"), as_matrix(C, "C")
    check_pair(E, C)
    inds = as_index_matrix(inds, C.shape[1])
    if inds.rows != E.shape[0]:
        raise ValueError(f"E has {E.shape[0]} rows but the index matrix has {inds.rows}")
    return E, C, inds


def ce_sampled_forward(E, C, inds, accountant=None):
    """Cross-entropy whose LSE runs over each row's indexed items only."""
    E, C, inds = _check_sampled(E, C, inds)
    logits = _sampled_logits(E, C, inds.idx)
    lse = _lse_rows(logits)
    pos = logits[:, 0].copy()
    if accountant is not None:
        N, W = logits.shape
        accountant.alloc("ce_minus.logits", N * W, RETAINED)
        accountant.alloc("ce_minus.lse", N, RETAINED)
        accountant.alloc("ce_minus.inds", N * W, INDEX)
    return LossOutput(float(-np.mean(pos - lse)), pos, lse)


def ce_sampled_backward(E, C, inds, upstream=1.0, accountant=None):
    E, C, inds = _check_sampled(E, C, inds)
    N, W = inds.idx.shape
    V = C.shape[1]
    w = row_weights(upstream, N)
    if accountant is not None:
        accountant.alloc("ce_minus.dlogits", N * W, SCRATCH)
    G = _softmax_rows(_sampled_logits(E, C, inds.idx))
    G[:, 0] -= 1.0
    G *= w[:, None]
    Cf = C.astype(np.float64)
    dE = np.einsum("nk,dnk->nd", G, Cf[:, inds.idx])
    dCt = np.zeros((V, E.shape[1]))
    contrib = G[:, :, None] * E.astype(np.float64)[:, None, :]
    np.add.at(dCt, inds.idx.ravel(), contrib.reshape(N * W, -1))
    if accountant is not None:
        accountant.free("ce_minus.dlogits")
    dt = grad_dtype(E, C)
    return GradPair(dE.astype(dt), np.ascontiguousarray(dCt.T, dtype=dt))


def bce_forward_backward(E, C, x, neg, upstream=1.0, accountant=None):
    """Binary cross-entropy with one negative per positive.

    Returns ``(loss, GradPair)``; the loss is
    ``-(1/N) sum_i [log sig(pos_i) + log(1 - sig(neg_i))]``.
    """
    E, C = as_matrix(E, "E"), as_matrix(C, "C")
    check_pair(E, C)
    N, V = E.shape[0], C.shape[1]
    x = check_targets(x, N, V)
    neg = check_targets(neg, N, V)
    clash = np.flatnonzero(neg == x)
    if clash.size:
        r = int(clash[0])
        raise ValueError(f"row {r}: negative item {neg[r]} equals the positive")
    w = row_weights(upstream, N)
    Ef, Cf = E.astype(np.float64), C.astype(np.float64)
    pos = np.einsum("nd,dn->n", Ef, Cf[:, x])
    ngl = np.einsum("nd,dn->n", Ef, Cf[:, neg])
    if accountant is not None:
        accountant.alloc("bce.logits", 2 * N, RETAINED)
        accountant.alloc("bce.neg", N, INDEX)
    # -log sig(p) = softplus(-p); -log(1 - sig(n)) = softplus(n)
    loss = float(np.mean(np.logaddexp(0.0, -pos) + np.logaddexp(0.0, ngl)))
    gp = w * (0.5 * (1.0 + np.tanh(0.5 * pos)) - 1.0)
    gn = w * 0.5 * (1.0 + np.tanh(0.5 * ngl))
    dE = gp[:, None] * Cf[:, x].T + gn[:, None] * Cf[:, neg].T
    dCt = np.zeros((V, E.shape[1]))
    np.add.at(dCt, x, gp[:, None] * Ef)
    np.add.at(dCt, neg, gn[:, None] * Ef)
    dt = grad_dtype(E, C)
    return loss, GradPair(dE.astype(dt), np.ascontiguousarray(dCt.T, dtype=dt))
