"""Mean-pooling toy sequence encoder with an untied linear classifier.

For a prefix ``x_1..x_t``: ``a_t = mean(Emb[x_1..x_t])``, ``h_t = tanh(W a_t + b)``.
The classifier ``C`` is D x V but stored column-major (item-major rows), which
is the layout the fused kernels read without copying.
"""
from dataclasses import dataclass

import numpy as np

from ..tensor import STORAGE_DTYPE


@dataclass
class ToyEncoderParams:
    emb: np.ndarray  # V x D
    W: np.ndarray  # D x D
    b: np.ndarray  # D
    C: np.ndarray  # D x V, Fortran-ordered

    @classmethod
    def init(cls, n_items, dim, rng, dtype=STORAGE_DTYPE, scale=0.1):
        gen = rng.substream(2).generator()
        bound = scale / np.sqrt(dim)
        emb = gen.uniform(-bound, bound, size=(n_items, dim)).astype(dtype)
        W = gen.uniform(-bound, bound, size=(dim, dim)).astype(dtype)
        C = gen.uniform(-bound, bound, size=(n_items, dim)).astype(dtype).T
        return cls(emb, W, np.zeros(dim, dtype=dtype), C)

    @property
    def n_items(self):
        return self.emb.shape[0]

    @property
    def dim(self):
        return self.emb.shape[1]

    def arrays(self):
        return {"emb": self.emb, "W": self.W, "b": self.b, "C": self.C}

    def copy(self):
        return ToyEncoderParams(self.emb.copy(), self.W.copy(), self.b.copy(), self.C.copy(order="F"))


def encode(params, prefix):
    prefix = np.asarray(prefix, dtype=np.int64)
    if prefix.size == 0:
        raise ValueError("cannot encode an empty prefix")
    a = params.emb[prefix].astype(np.float64).mean(axis=0)
    return np.tanh(params.W.astype(np.float64) @ a + params.b)


def encode_many(params, prefixes, max_len=None):
    """Final hidden state for each prefix (last ``max_len`` items when given)."""
    out = np.empty((len(prefixes), params.dim))
    for k, p in enumerate(prefixes):
        p = np.asarray(p, dtype=np.int64)
        if max_len is not None:
            p = p[-max_len:]
        out[k] = encode(params, p)
    return out


@dataclass
class BatchTrace:
    """Forward intermediates needed for the encoder backward pass."""

    X: np.ndarray  # B x L padded item ids
    out_mask: np.ndarray  # B x L, True where position t predicts X[:, t+1]
    A: np.ndarray  # N x D pooled prefixes (valid output positions only)
    H: np.ndarray  # N x D
    targets: np.ndarray  # N


def pad_windows(windows):
    L = max(w.shape[0] for w in windows)
    X = np.zeros((len(windows), L), dtype=np.int64)
    lengths = np.array([w.shape[0] for w in windows])
    for k, w in enumerate(windows):
        X[k, :w.shape[0]] = w
    return X, lengths


def forward_batch(params, windows):
    """Hidden states for every next-item position of every window."""
    X, lengths = pad_windows(windows)
    B, L = X.shape
    valid = np.arange(L)[None, :] < lengths[:, None]
    out_mask = np.arange(L)[None, :] < (lengths - 1)[:, None]
    rows = params.emb[X].astype(np.float64) * valid[:, :, None]
    prefix_mean = np.cumsum(rows, axis=1) / np.arange(1, L + 1)[None, :, None]
    A = prefix_mean[out_mask]
    H = np.tanh(A @ params.W.astype(np.float64).T + params.b)
    targets = X[:, 1:][out_mask[:, :-1]]
    return BatchTrace(X, out_mask, A, H, targets)


def backward_batch(params, trace, dH):
    """Chain the loss gradient w.r.t. ``H`` back to emb, W and b (float64)."""
    dH = np.asarray(dH, dtype=np.float64)
    G = (1.0 - trace.H ** 2) * dH
    dW = G.T @ trace.A
    db = G.sum(axis=0)
    dA = G @ params.W.astype(np.float64)
    B, L = trace.X.shape
    D = params.dim
    # position t pools items 0..t with weight 1/(t+1); item k collects sum_{t>=k}
    scaled = np.zeros((B, L, D))
    scaled[trace.out_mask] = dA / (np.nonzero(trace.out_mask)[1] + 1)[:, None]
    per_item = np.flip(np.cumsum(np.flip(scaled, axis=1), axis=1), axis=1)
    demb = np.zeros((params.n_items, D))
    touched = np.cumsum(trace.out_mask[:, ::-1], axis=1)[:, ::-1] > 0
    np.add.at(demb, trace.X[touched], per_item[touched])
    return {"emb": demb, "W": dW, "b": db}
