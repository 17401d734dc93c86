"""Ranking metrics and rank correlation."""
import numpy as np
from scipy.stats import rankdata

from .model import encode_many


def target_ranks(scores, targets):
    """1-based rank of each target; ties broken by ascending item id."""
    rows = np.arange(scores.shape[0])
    t_score = scores[rows, targets][:, None]
    ids = np.arange(scores.shape[1])[None, :]
    ahead = (scores > t_score) | ((scores == t_score) & (ids < targets[:, None]))
    return 1 + ahead.sum(axis=1)


def top_k(scores, k):
    order = np.argsort(-scores, axis=1, kind="stable")
    return order[:, :k]


def ndcg_at_k(ranks, k):
    ranks = np.asarray(ranks)
    return np.where(ranks <= k, 1.0 / np.log2(ranks + 1.0), 0.0)


def evaluate(params, pairs, pop, k=10, max_len=None, chunk=512):
    """NDCG@k, Coverage@k and Surprisal@k over ``(prefix, target)`` pairs.

    Surprisal of an item is ``-log2(count / total) / log2(total)`` with counts
    from the training split (unseen items count as 1), averaged over each
    user's top-k and then over users.
    """
    if not pairs:
        raise ValueError("no evaluation pairs")
    if pop.total <= 1:
        raise ValueError("popularity table needs more than one interaction")
    V = params.n_items
    counts = np.maximum(pop.counts, 1).astype(np.float64)
    self_info = -np.log2(counts / pop.total) / np.log2(pop.total)
    C = params.C.astype(np.float64)
    ndcg, surprisal = [], []
    covered = np.zeros(V, dtype=bool)
    for s in range(0, len(pairs), chunk):
        part = pairs[s:s + chunk]
        H = encode_many(params, [p for p, _ in part], max_len)
        scores = H @ C
        targets = np.array([t for _, t in part], dtype=np.int64)
        ndcg.append(ndcg_at_k(target_ranks(scores, targets), k))
        top = top_k(scores, k)
        covered[top.ravel()] = True
        surprisal.append(self_info[top].mean(axis=1))
    return {
        "ndcg": float(np.concatenate(ndcg).mean()),
        "coverage": float(covered.sum() / V),
        "surprisal": float(np.concatenate(surprisal).mean()),
    }


def random_ndcg_baseline(n_items, k):
    """Expected NDCG@k when the target's rank is uniform on 1..n_items."""
    ranks = np.arange(1, n_items + 1)
    return float(ndcg_at_k(ranks, k).mean())


def spearman(a, b):
    """Spearman rank correlation with average ranks for ties; None if undefined."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("need two equal-length samples of size >= 2")
    ra, rb = rankdata(a), rankdata(b)
    if np.ptp(ra) == 0 or np.ptp(rb) == 0:
        return None
    return float(np.corrcoef(ra, rb)[0, 1])
