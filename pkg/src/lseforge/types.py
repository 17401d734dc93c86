"""Containers shared by the oracles and the fused kernels."""
from dataclasses import dataclass

import numpy as np


@dataclass
class LossOutput:
    """Mean loss plus the per-row state a fused kernel keeps for backward."""

    loss: float
    pos_logits: np.ndarray
    lse: np.ndarray


@dataclass
class GradPair:
    d_embeddings: np.ndarray
    d_classifier: np.ndarray
    skipped_fraction: float = 0.0


@dataclass
class NegIndexMatrix:
    """N x (1 + ns) item indices; column 0 is each row's positive item."""

    idx: np.ndarray

    def __post_init__(self):
        self.idx = np.ascontiguousarray(self.idx, dtype=np.int64)
        if self.idx.ndim != 2 or self.idx.shape[1] < 1:
            raise ValueError(f"index matrix must be N x (1+ns), got shape {self.idx.shape}")

    @property
    def rows(self):
        return self.idx.shape[0]

    @property
    def width(self):
        return self.idx.shape[1]

    @property
    def ns(self):
        return self.idx.shape[1] - 1

    @property
    def positives(self):
        return self.idx[:, 0]

    def validate(self, n_items):
        bad = (self.idx < 0) | (self.idx >= n_items)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise IndexError(f"row {r}: item index {self.idx[r, c]} outside [0, {n_items})")
        clash = self.idx[:, 1:] == self.idx[:, :1]
        if clash.any():
            r = int(np.argwhere(clash)[0, 0])
            raise ValueError(f"row {r}: negative slot repeats positive item {self.idx[r, 0]}")
        return self


def as_index_matrix(inds, n_items):
    if not isinstance(inds, NegIndexMatrix):
        inds = NegIndexMatrix(inds)
    return inds.validate(n_items)


def check_targets(x, n_rows, n_items):
    x = np.asarray(x, dtype=np.int64).ravel()
    if x.shape[0] != n_rows:
        raise ValueError(f"expected {n_rows} targets, got {x.shape[0]}")
    bad = np.flatnonzero((x < 0) | (x >= n_items))
    if bad.size:
        r = int(bad[0])
        raise IndexError(f"row {r}: target index {x[r]} outside [0, {n_items})")
    return x


def row_weights(upstream, n_rows):
    """Per-row gradient of the reduced loss w.r.t. each row's ``lse - pos`` term.

    A scalar ``upstream`` scales the mean reduction (``upstream / N`` per row);
    an array of length N is used as given.
    """
    u = np.asarray(upstream, dtype=np.float64)
    if u.ndim == 0:
        return np.full(n_rows, float(u) / n_rows)
    if u.shape != (n_rows,):
        raise ValueError(f"upstream must be scalar or length {n_rows}, got shape {u.shape}")
    return u.copy()


def check_pair(E, C):
    if E.ndim != 2 or C.ndim != 2:
        raise ValueError(f"E and C must be 2-D, got {E.shape} and {C.shape}")
    if E.shape[1] != C.shape[0]:
        raise ValueError(f"E is {E.shape} but C is {C.shape}: hidden sizes disagree")


def grad_dtype(E, C):
    return np.result_type(E.dtype, C.dtype, np.float32)
