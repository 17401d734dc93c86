"""Pure-numpy fallback with the same tiling and float64 accumulation."""
import numpy as np


def cce_forward(E, ct, x, row_block, col_block):
    N, D = E.shape
    V = ct.shape[0]
    pos = np.empty(N)
    lse = np.empty(N)
    for r0 in range(0, N, row_block):
        r1 = min(N, r0 + row_block)
        eblk = E[r0:r1].astype(np.float64)
        m = np.full(r1 - r0, -np.inf)
        d = np.zeros(r1 - r0)
        for c0 in range(0, V, col_block):
            cblk = ct[c0:c0 + col_block].astype(np.float64)
            tile = eblk @ cblk.T
            m_new = np.maximum(m, tile.max(axis=1))
            d = d * np.exp(m - m_new) + np.exp(tile - m_new[:, None]).sum(axis=1)
            m = m_new
        lse[r0:r1] = m + np.log(d)
        pos[r0:r1] = np.einsum("ij,ij->i", eblk, ct[x[r0:r1]].astype(np.float64))
    return pos, lse


def cce_backward(E, ct, x, lse, w, row_block, col_block, eps):
    N, D = E.shape
    V = ct.shape[0]
    dE = np.zeros((N, D))
    dCt = np.zeros((V, D))
    skipped = 0
    for r0 in range(0, N, row_block):
        r1 = min(N, r0 + row_block)
        eblk = E[r0:r1].astype(np.float64)
        rows = np.arange(r1 - r0)
        for c0 in range(0, V, col_block):
            c1 = min(V, c0 + col_block)
            cblk = ct[c0:c1].astype(np.float64)
            s = np.exp(eblk @ cblk.T - lse[r0:r1, None])
            is_pos = np.zeros(s.shape, dtype=bool)
            hit = (x[r0:r1] >= c0) & (x[r0:r1] < c1)
            is_pos[rows[hit], x[r0:r1][hit] - c0] = True
            drop = (s < eps) & ~is_pos
            skipped += int(drop.sum())
            g = w[r0:r1, None] * (s - is_pos)
            g[drop] = 0.0
            dE[r0:r1] += g @ cblk
            dCt[c0:c1] += g.T @ eblk
    return dE, dCt, skipped


def ccem_forward(E, ct, inds, row_block):
    N, D = E.shape
    pos = np.empty(N)
    lse = np.empty(N)
    for r0 in range(0, N, row_block):
        r1 = min(N, r0 + row_block)
        eblk = E[r0:r1].astype(np.float64)
        m = np.full(r1 - r0, -np.inf)
        d = np.zeros(r1 - r0)
        for j in range(inds.shape[1]):
            o = np.einsum("ij,ij->i", eblk, ct[inds[r0:r1, j]].astype(np.float64))
            if j == 0:
                pos[r0:r1] = o
            m_new = np.maximum(m, o)
            d = d * np.exp(m - m_new) + np.exp(o - m_new)
            m = m_new
        lse[r0:r1] = m + np.log(d)
    return pos, lse


def ccem_backward(E, ct, inds, lse, w, row_block):
    N, D = E.shape
    V = ct.shape[0]
    dE = np.zeros((N, D))
    dCt = np.zeros((V, D))
    for r0 in range(0, N, row_block):
        r1 = min(N, r0 + row_block)
        eblk = E[r0:r1].astype(np.float64)
        for j in range(inds.shape[1]):
            cg = ct[inds[r0:r1, j]].astype(np.float64)
            s = np.exp(np.einsum("ij,ij->i", eblk, cg) - lse[r0:r1])
            g = w[r0:r1] * (s - 1.0 if j == 0 else s)
            dE[r0:r1] += g[:, None] * cg
            np.add.at(dCt, inds[r0:r1, j], g[:, None] * eblk)
    return dE, dCt
