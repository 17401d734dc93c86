"""Negative index matrices: global uniform and popularity-weighted sampling.

Draws are with replacement across slots and reject the row's own positive.
Every draw is a pure function of (seed, row, slot, attempt) via the counter
generator in :mod:`lseforge.tensor`, so output does not depend on scheduling.
"""
from dataclasses import dataclass

import numpy as np

from .types import NegIndexMatrix

MAX_RETRIES = 100


class SamplingError(ValueError):
    pass


@dataclass
class PopularityTable:
    counts: np.ndarray
    total: int

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if (self.counts < 0).any():
            raise ValueError("popularity counts must be non-negative")
        if int(self.counts.sum()) != int(self.total):
            raise ValueError(f"total {self.total} != sum of counts {self.counts.sum()}")

    @classmethod
    def from_items(cls, items, n_items):
        counts = np.bincount(np.asarray(items, dtype=np.int64), minlength=n_items)
        return cls(counts, int(counts.sum()))

    @property
    def n_items(self):
        return self.counts.shape[0]


class AliasTable:
    """Vose alias table for O(1) draws from a discrete distribution."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=np.float64)
        n = w.shape[0]
        if n == 0 or (w < 0).any() or not w.sum() > 0:
            raise SamplingError("alias table needs non-negative weights with a positive sum")
        scaled = w * (n / w.sum())
        prob = np.ones(n)
        alias = np.arange(n)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            g = large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] -= 1.0 - scaled[s]
            (small if scaled[g] < 1.0 else large).append(g)
        # leftovers are 1 up to rounding
        self.prob = prob
        self.alias = alias

    def __len__(self):
        return self.prob.shape[0]

    def draw(self, u_col, u_coin):
        col = np.minimum((u_col * len(self)).astype(np.int64), len(self) - 1)
        return np.where(u_coin < self.prob[col], col, self.alias[col])


def _rejection_fill(positives, ns, rng, draw):
    """Fill an N x ns block, redrawing entries that hit their row's positive.

    ``draw(keys, counters)`` maps per-entry stream keys and counters to items;
    the counter encodes (slot, attempt) so reruns reproduce exactly.
    """
    N = positives.shape[0]
    keys = np.repeat(rng.row_keys(np.arange(N)), ns)
    slots = np.tile(np.arange(ns, dtype=np.uint64), N)
    target = np.repeat(positives, ns)
    out = draw(keys, slots * np.uint64(MAX_RETRIES))
    pending = np.flatnonzero(out == target)
    attempt = 1
    while pending.size and attempt < MAX_RETRIES:
        out[pending] = draw(keys[pending], slots[pending] * np.uint64(MAX_RETRIES) + np.uint64(attempt))
        pending = pending[out[pending] == target[pending]]
        attempt += 1
    if pending.size:
        r = int(pending[0] // ns)
        raise SamplingError(
            f"row {r}: no valid negative after {MAX_RETRIES} draws (positive {positives[r]})")
    return out.reshape(N, ns)


def _assemble(positives, negs):
    return NegIndexMatrix(np.concatenate([positives[:, None], negs], axis=1))


def _check(positives, ns):
    positives = np.asarray(positives, dtype=np.int64).ravel()
    if ns < 0:
        raise SamplingError("ns must be >= 0")
    return positives


def sample_uniform(positives, ns, n_items, rng):
    """Negatives drawn uniformly from the catalog minus each row's positive."""
    positives = _check(positives, ns)
    if ns > n_items - 1:
        raise SamplingError(f"ns={ns} exceeds catalog size minus one ({n_items - 1})")
    if ns == 0:
        return _assemble(positives, np.empty((positives.shape[0], 0), dtype=np.int64))

    def draw(keys, counters):
        u = rng.uniform(counters, keys)
        return np.minimum((u * n_items).astype(np.int64), n_items - 1)

    return _assemble(positives, _rejection_fill(positives, ns, rng, draw))


def sample_popularity(positives, ns, pop, rng, exponent=1.0):
    """Negatives drawn with probability proportional to ``counts ** exponent``."""
    positives = _check(positives, ns)
    if pop.total == 0 or not (pop.counts > 0).any():
        raise SamplingError("popularity table has no interactions")
    if ns == 0:
        return _assemble(positives, np.empty((positives.shape[0], 0), dtype=np.int64))
    weights = pop.counts.astype(np.float64)
    if exponent != 1.0:
        weights = np.where(pop.counts > 0, weights ** exponent, 0.0)
    table = AliasTable(weights)

    def draw(keys, counters):
        # two uniforms per draw: even counter picks the column, odd flips the coin
        c = counters * np.uint64(2)
        return table.draw(rng.uniform(c, keys), rng.uniform(c + np.uint64(1), keys))

    return _assemble(positives, _rejection_fill(positives, ns, rng, draw))
