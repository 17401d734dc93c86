"""Interaction logs, CSV ingestion, the global temporal split and a synthetic corpus."""
import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

HEADER = ("user_id", "item_id", "timestamp")


class DataError(ValueError):
    pass


@dataclass
class InteractionLog:
    """Events sorted by (user, ts); users and items are dense indices.

    ``user_ids`` / ``item_ids`` map dense indices back to the original ids.
    The position of an event in these arrays is its event id.
    """

    users: np.ndarray
    items: np.ndarray
    ts: np.ndarray
    n_users: int
    n_items: int
    user_ids: np.ndarray = None
    item_ids: np.ndarray = None

    def __len__(self):
        return self.users.shape[0]

    @classmethod
    def from_arrays(cls, users, items, ts, n_items=None):
        """Sort by (user, ts) keeping input order among ties; densify ids.

        With ``n_items`` given, item ids are taken as already dense in
        ``[0, n_items)`` and not re-indexed.
        """
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        ts = np.asarray(ts, dtype=np.int64)
        order = np.lexsort((np.arange(users.shape[0]), ts, users))
        users, items, ts = users[order], items[order], ts[order]
        user_ids, users = np.unique(users, return_inverse=True)
        if n_items is None:
            item_ids, items = np.unique(items, return_inverse=True)
            n_items = item_ids.shape[0]
        else:
            if items.size and (items.min() < 0 or items.max() >= n_items):
                raise DataError(f"item ids must lie in [0, {n_items})")
            item_ids = np.arange(n_items)
        return cls(users, items, ts, user_ids.shape[0], int(n_items), user_ids, item_ids)

    def sequences(self):
        """Per-user (event_ids) arrays in time order."""
        bounds = np.flatnonzero(np.diff(self.users)) + 1
        return np.split(np.arange(len(self)), bounds)


def write_vocab(log, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["item_id", "dense_index"])
        for dense, orig in enumerate(log.item_ids):
            w.writerow([int(orig), dense])


def ingest_csv(path, vocab_path=None, min_events=2):
    """Read ``user_id,item_id,timestamp`` rows into an :class:`InteractionLog`.

    Users with fewer than ``min_events`` events are dropped; duplicate rows are
    kept as distinct events. The item vocabulary (original id -> dense index)
    is written to ``vocab_path`` (default: ``<path stem>.vocab.csv``).
    """
    path = Path(path)
    users, items, ts = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        if tuple(h.strip() for h in header) != HEADER:
            raise DataError(f"{path}:1: expected header {','.join(HEADER)}, got {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                u, i, t = (int(v) for v in row)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer field in {row}") from None
            users.append(u)
            items.append(i)
            ts.append(t)
    if not users:
        raise DataError(f"{path}: no interaction rows")
    users = np.array(users, dtype=np.int64)
    uniq, counts = np.unique(users, return_counts=True)
    keep = np.isin(users, uniq[counts >= min_events])
    if not keep.any():
        raise DataError(f"{path}: no user has at least {min_events} events")
    log = InteractionLog.from_arrays(users[keep], np.array(items)[keep], np.array(ts)[keep])
    if vocab_path is None:
        vocab_path = path.with_suffix(".vocab.csv")
    write_vocab(log, vocab_path)
    return log


@dataclass
class SplitSpec:
    """Training sequences plus validation / test (prefix, target) pairs.

    ``*_events`` hold event ids into the source log so leakage can be checked
    by set intersection.
    """

    train: list
    train_events: list
    valid: list
    valid_events: list
    test: list
    test_events: list
    cutoff_ts: int
    n_items: int
    valid_users: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    test_users: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def train_items(self):
        if not self.train:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(self.train)


def nearest_rank_quantile(values, q):
    """Smallest value with at least ``ceil(q * n)`` values at or below it."""
    v = np.sort(np.asarray(values))
    n = v.shape[0]
    rank = max(1, math.ceil(Fraction(str(q)) * n))
    return v[min(rank, n) - 1]


def temporal_split(log, rng, quantile=0.9, val_user_frac=0.05):
    """Global temporal cutoff with by-user validation.

    Events with ``ts <= cutoff`` form the training pool. A ``val_user_frac``
    share of pool users (at least one when any qualify) have their last pool
    event held out as a validation target. For every user with events after
    the cutoff, their last event is the test target and all earlier events are
    the prefix.
    """
    if len(log) == 0:
        raise DataError("cannot split an empty log")
    if log.ts.min() == log.ts.max():
        raise DataError("all events share one timestamp; temporal split is degenerate")
    cutoff = int(nearest_rank_quantile(log.ts, quantile))
    seqs = log.sequences()

    pool = [(s[log.ts[s] <= cutoff]) for s in seqs]
    eligible = np.array([u for u, p in enumerate(pool) if p.shape[0] >= 2], dtype=np.int64)
    n_val = 0
    if val_user_frac > 0 and eligible.size:
        n_val = max(1, int(round(val_user_frac * eligible.size)))
    gen = rng.substream(1).generator()
    val_users = np.sort(gen.choice(eligible, size=n_val, replace=False)) if n_val else eligible[:0]
    val_set = set(val_users.tolist())

    train, train_events, valid, valid_events = [], [], [], []
    for u, p in enumerate(pool):
        if u in val_set:
            valid.append((log.items[p[:-1]], int(log.items[p[-1]])))
            valid_events.append(int(p[-1]))
            p = p[:-1]
        if p.shape[0] >= 2:
            train.append(log.items[p])
            train_events.append(p)

    test, test_events, test_users = [], [], []
    for u, s in enumerate(seqs):
        if log.ts[s[-1]] <= cutoff or s.shape[0] < 2:
            continue
        test.append((log.items[s[:-1]], int(log.items[s[-1]])))
        test_events.append(int(s[-1]))
        test_users.append(u)

    return SplitSpec(train, train_events, valid, valid_events, test, test_events, cutoff,
                     log.n_items, val_users, np.array(test_users, dtype=np.int64))


def check_no_leakage(split):
    """Raise if any test or validation target event also appears in training."""
    seen = set(np.concatenate(split.train_events).tolist()) if split.train_events else set()
    leaked = seen & (set(split.test_events) | set(split.valid_events))
    if leaked:
        raise DataError(f"target events leaked into training: {sorted(leaked)[:5]}")


def make_synthetic(n_items, n_users, seq_len, n_clusters, rng, stay_prob=0.9):
    """Clustered random-walk corpus with a Zipf(1) popularity tail.

    Items are split into ``n_clusters`` contiguous clusters. Each user has a
    home cluster; every step stays there with probability ``stay_prob``
    (picking an item by Zipf rank inside the cluster) and otherwise jumps to
    a uniformly random catalog item. User ``u``'s k-th event has timestamp
    ``(start_u + k) * n_users + u``, so timestamps are distinct and users
    overlap in time.
    """
    if n_clusters < 1 or n_clusters > n_items:
        raise ValueError("need 1 <= n_clusters <= n_items")
    gen = rng.substream(0).generator()
    clusters = np.array_split(np.arange(n_items), n_clusters)
    zipf = []
    for c in clusters:
        w = 1.0 / np.arange(1, c.shape[0] + 1)
        zipf.append(w / w.sum())

    home = gen.integers(0, n_clusters, size=n_users)
    stay = gen.random((n_users, seq_len)) < stay_prob
    jumps = gen.integers(0, n_items, size=(n_users, seq_len))
    items = np.empty((n_users, seq_len), dtype=np.int64)
    for u in range(n_users):
        c = home[u]
        local = gen.choice(clusters[c].shape[0], size=seq_len, p=zipf[c])
        items[u] = np.where(stay[u], clusters[c][local], jumps[u])
    start = gen.integers(0, seq_len, size=n_users)
    users = np.repeat(np.arange(n_users), seq_len)
    ts = (start[:, None] + np.arange(seq_len)[None, :]) * n_users + np.arange(n_users)[:, None]
    return InteractionLog.from_arrays(users, items.ravel(), ts.ravel(), n_items=n_items)
