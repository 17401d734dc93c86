"""numba implementations of the blockwise loss kernels.

All kernels take the classifier as ``ct`` (V x D, the transpose view of the
D x V matrix) and accumulate in float64. Work is split so that every output
element has exactly one writer: row blocks own rows of dE, column blocks own
rows of dCt. No cross-worker reduction exists, so results are bitwise
independent of the thread count.
"""
import math

import numpy as np
from numba import njit, prange


@njit(cache=True)
def _load_rows(src, r0, r1, dst):
    for i in range(r1 - r0):
        for t in range(src.shape[1]):
            dst[i, t] = src[r0 + i, t]


# reassoc lets LLVM split the dot-product chain into SIMD lanes; no nnan/ninf
# because the kernels rely on -inf sentinels
_DOT_FLAGS = {"reassoc", "contract"}


LN2_HI = 6.93147180369123816490e-01
LN2_LO = 1.90821492927058770002e-10
LOG2E = 1.44269504088896338700e+00
EXP_FLOOR = -708.0


@njit(cache=True, fastmath={"contract"})
def _exp_inplace(buf, kbuf):
    """``buf = exp(buf)`` for a contiguous 1-D float64 buffer of values <= 0.

    Written so LLVM can vectorize it (math.exp stays scalar without SVML):
    Cody-Waite reduction to |r| <= ln2/2, degree-12 Taylor polynomial, then
    2**k added straight into the exponent bits. Max relative error ~2e-16;
    inputs below -708 return 0.
    """
    n = buf.shape[0]
    for j in range(n):
        x = buf[j]
        under = x < EXP_FLOOR
        if under:
            x = EXP_FLOOR
        k = np.floor(x * LOG2E + 0.5)
        r = x - k * LN2_HI - k * LN2_LO
        p = 1.0 / 479001600.0
        p = p * r + 1.0 / 39916800.0
        p = p * r + 1.0 / 3628800.0
        p = p * r + 1.0 / 362880.0
        p = p * r + 1.0 / 40320.0
        p = p * r + 1.0 / 5040.0
        p = p * r + 1.0 / 720.0
        p = p * r + 1.0 / 120.0
        p = p * r + 1.0 / 24.0
        p = p * r + 1.0 / 6.0
        p = p * r + 0.5
        p = p * r + 1.0
        p = p * r + 1.0
        buf[j] = 0.0 if under else p
        kbuf[j] = np.int64(k)
    bits = buf.view(np.int64)
    for j in range(n):
        if bits[j] != 0:
            bits[j] += kbuf[j] << 52


@njit(cache=True, fastmath=_DOT_FLAGS)
def _dot_row(E, i, ct, v):
    acc = 0.0
    for t in range(E.shape[1]):
        acc += np.float64(E[i, t]) * np.float64(ct[v, t])
    return acc


@njit(parallel=True, cache=True)
def cce_forward(E, ct, x, row_block, col_block):
    N, D = E.shape
    V = ct.shape[0]
    pos = np.empty(N)
    lse = np.empty(N)
    n_blocks = (N + row_block - 1) // row_block
    for b in prange(n_blocks):
        r0 = b * row_block
        r1 = min(N, r0 + row_block)
        n = r1 - r0
        # running max / sum live in the output slots until the block finishes
        m = lse[r0:r1]
        d = pos[r0:r1]
        m[:] = -np.inf
        d[:] = 0.0
        eblk = np.empty((n, D))
        _load_rows(E, r0, r1, eblk)
        cblk = np.empty((col_block, D))
        kbuf = np.empty(n * col_block, dtype=np.int64)
        for c0 in range(0, V, col_block):
            c1 = min(V, c0 + col_block)
            k = c1 - c0
            _load_rows(ct, c0, c1, cblk)
            tile = np.dot(eblk, cblk[:k].T)
            scale = np.empty(n)
            for i in range(n):
                mt = m[i]
                for j in range(k):
                    if tile[i, j] > mt:
                        mt = tile[i, j]
                scale[i] = d[i] * math.exp(m[i] - mt) if d[i] > 0.0 else 0.0
                m[i] = mt
                for j in range(k):
                    tile[i, j] -= mt
            _exp_inplace(tile.reshape(n * k), kbuf)
            for i in range(n):
                s = scale[i]
                for j in range(k):
                    s += tile[i, j]
                d[i] = s
        for i in range(n):
            lse[r0 + i] = m[i] + math.log(d[i])
            pos[r0 + i] = _dot_row(E, r0 + i, ct, x[r0 + i])
    return pos, lse


@njit(cache=True)
def _cce_tile_factor(tile, r0, c0, x, lse, w, eps, kbuf):
    """Turn a logit tile into ``w * (softmax - onehot)`` in place, dropping
    off-target entries below ``eps``. Returns (#dropped, #kept)."""
    n, k = tile.shape
    for i in range(n):
        for j in range(k):
            tile[i, j] -= lse[r0 + i]
    _exp_inplace(tile.reshape(n * k), kbuf)
    dropped = 0
    for i in range(n):
        xi = x[r0 + i] - c0
        wi = w[r0 + i]
        for j in range(k):
            s = tile[i, j]
            if j == xi:
                tile[i, j] = wi * (s - 1.0)
            elif s < eps:
                tile[i, j] = 0.0
                dropped += 1
            else:
                tile[i, j] = wi * s
    return dropped, n * k - dropped


@njit(parallel=True, cache=True)
def cce_backward(E, ct, x, lse, w, row_block, col_block, eps):
    N, D = E.shape
    V = ct.shape[0]
    dE = np.zeros((N, D))
    dCt = np.zeros((V, D))
    n_rb = (N + row_block - 1) // row_block
    n_cb = (V + col_block - 1) // col_block
    skipped = np.zeros(n_rb, dtype=np.int64)

    # pass 1: row blocks own dE
    for b in prange(n_rb):
        r0 = b * row_block
        r1 = min(N, r0 + row_block)
        n = r1 - r0
        eblk = np.empty((n, D))
        _load_rows(E, r0, r1, eblk)
        cblk = np.empty((col_block, D))
        kbuf = np.empty(n * col_block, dtype=np.int64)
        cnt = 0
        for c0 in range(0, V, col_block):
            c1 = min(V, c0 + col_block)
            k = c1 - c0
            _load_rows(ct, c0, c1, cblk)
            tile = np.dot(eblk, cblk[:k].T)
            dropped, kept = _cce_tile_factor(tile, r0, c0, x, lse, w, eps, kbuf)
            cnt += dropped
            if kept:
                dE[r0:r1] += np.dot(tile, cblk[:k])
        skipped[b] = cnt

    # pass 2: column blocks own dCt, row blocks visited in fixed order
    for cb in prange(n_cb):
        c0 = cb * col_block
        c1 = min(V, c0 + col_block)
        k = c1 - c0
        cblk = np.empty((k, D))
        _load_rows(ct, c0, c1, cblk)
        eblk = np.empty((row_block, D))
        kbuf = np.empty(row_block * k, dtype=np.int64)
        for r0 in range(0, N, row_block):
            r1 = min(N, r0 + row_block)
            n = r1 - r0
            _load_rows(E, r0, r1, eblk)
            tile = np.dot(eblk[:n], cblk.T)
            dropped, kept = _cce_tile_factor(tile, r0, c0, x, lse, w, eps, kbuf)
            if kept:
                dCt[c0:c1] += np.dot(tile.T, eblk[:n])
    return dE, dCt, skipped.sum()


@njit(cache=True)
def cce_backward_serial(E, ct, x, lse, w, row_block, col_block, eps):
    """Single-worker variant: each tile is exponentiated once and feeds both
    gradients. Every output element receives its tile contributions in the
    same order as in :func:`cce_backward`, so the results are bitwise equal."""
    N, D = E.shape
    V = ct.shape[0]
    dE = np.zeros((N, D))
    dCt = np.zeros((V, D))
    eblk = np.empty((row_block, D))
    cblk = np.empty((col_block, D))
    kbuf = np.empty(row_block * col_block, dtype=np.int64)
    skipped = 0
    for r0 in range(0, N, row_block):
        r1 = min(N, r0 + row_block)
        n = r1 - r0
        _load_rows(E, r0, r1, eblk)
        for c0 in range(0, V, col_block):
            c1 = min(V, c0 + col_block)
            k = c1 - c0
            _load_rows(ct, c0, c1, cblk)
            tile = np.dot(eblk[:n], cblk[:k].T)
            dropped, kept = _cce_tile_factor(tile, r0, c0, x, lse, w, eps, kbuf)
            skipped += dropped
            if kept:
                dE[r0:r1] += np.dot(tile, cblk[:k])
                dCt[c0:c1] += np.dot(tile.T, eblk[:n])
    return dE, dCt, skipped


@njit(cache=True)
def _online_fold(m, d, o):
    # one exp per element: rescale only when the running max moves
    if o > m:
        return o, d * math.exp(m - o) + 1.0
    return m, d + math.exp(o - m)


@njit(parallel=True, cache=True)
def ccem_forward(E, ct, inds, row_block):
    N, D = E.shape
    W = inds.shape[1]
    pos = np.empty(N)
    lse = np.empty(N)
    n_blocks = (N + row_block - 1) // row_block
    for b in prange(n_blocks):
        r0 = b * row_block
        r1 = min(N, r0 + row_block)
        n = r1 - r0
        eblk = np.empty((n, D))
        _load_rows(E, r0, r1, eblk)
        o = np.empty(n)
        m = np.full(n, -np.inf)
        d = np.zeros(n)
        for i in range(n):
            for j in range(W):
                # indexed load of classifier row inds[i, j]
                v = inds[r0 + i, j]
                acc = _dot_row(eblk, i, ct, v)
                o[i] = acc
                if j == 0:
                    pos[r0 + i] = acc
                m[i], d[i] = _online_fold(m[i], d[i], acc)
            lse[r0 + i] = m[i] + math.log(d[i])
    return pos, lse


@njit(parallel=True, cache=True)
def ccem_backward(E, ct, inds, lse, w, row_block):
    N, D = E.shape
    V = ct.shape[0]
    W = inds.shape[1]
    dE = np.zeros((N, D))
    dCt = np.zeros((V, D))
    n_blocks = (N + row_block - 1) // row_block
    for b in prange(n_blocks):
        r0 = b * row_block
        r1 = min(N, r0 + row_block)
        n = r1 - r0
        eblk = np.empty((n, D))
        _load_rows(E, r0, r1, eblk)
        for i in range(n):
            for j in range(W):
                v = inds[r0 + i, j]
                acc = _dot_row(eblk, i, ct, v)
                s = math.exp(acc - lse[r0 + i])
                g = w[r0 + i] * (s - 1.0 if j == 0 else s)
                for t in range(D):
                    dE[r0 + i, t] += g * np.float64(ct[v, t])
    # indexed scatter into dCt: serial, rows then slots, so duplicates sum in a fixed order
    for i in range(N):
        for j in range(W):
            v = inds[i, j]
            acc = _dot_row(E, i, ct, v)
            s = math.exp(acc - lse[i])
            g = w[i] * (s - 1.0 if j == 0 else s)
            for t in range(D):
                dCt[v, t] += g * np.float64(E[i, t])
    return dE, dCt
