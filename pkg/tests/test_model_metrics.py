import math

import numpy as np
import pytest

from helpers import central_diff
from lseforge.harness.metrics import (evaluate, ndcg_at_k, random_ndcg_baseline, spearman,
                                      target_ranks, top_k)
from lseforge.harness.model import ToyEncoderParams, backward_batch, encode, forward_batch
from lseforge.harness.optim import Adam
from lseforge.oracles import ce_full_backward, ce_full_forward
from lseforge.sampler import PopularityTable
from lseforge.tensor import Rng


def params64(V=12, D=4, seed=0):
    return ToyEncoderParams.init(V, D, Rng(seed), dtype=np.float64, scale=3.0)


def test_init_ranges_and_layout():
    p = ToyEncoderParams.init(50, 16, Rng(0))
    bound = 0.1 / 4
    for a in (p.emb, p.W, p.C):
        assert np.abs(a).max() <= bound and a.dtype == np.float32
    assert not p.b.any()
    assert p.C.shape == (16, 50) and p.C.flags.f_contiguous


def test_encode_identity_single_item():
    p = params64()
    p.W[:] = np.eye(4)
    p.emb[3] = [0.01, -0.02, 0.03, 0.0]
    np.testing.assert_allclose(encode(p, [3]), np.tanh(p.emb[3]), atol=1e-16)


def test_encode_permutation_symmetric():
    p = params64()
    np.testing.assert_allclose(encode(p, [1, 5, 7, 5]), encode(p, [5, 7, 5, 1]), atol=1e-15)


def test_encode_empty_prefix():
    with pytest.raises(ValueError):
        encode(params64(), [])


def test_forward_batch_matches_encode():
    p = params64()
    windows = [np.array([1, 2, 3, 4]), np.array([5, 6])]
    tr = forward_batch(p, windows)
    assert tr.targets.tolist() == [2, 3, 4, 6]
    ref = [encode(p, [1]), encode(p, [1, 2]), encode(p, [1, 2, 3]), encode(p, [5])]
    np.testing.assert_allclose(tr.H, ref, atol=1e-15)


def test_encoder_chain_finite_differences():
    p = params64(V=10, D=3)
    windows = [np.array([1, 2, 3, 1, 9]), np.array([4, 4, 7]), np.array([0, 8])]

    def loss():
        tr = forward_batch(p, windows)
        return ce_full_forward(tr.H, p.C, tr.targets).loss

    tr = forward_batch(p, windows)
    g = backward_batch(p, tr, ce_full_backward(tr.H, p.C, tr.targets).d_embeddings)
    for name in ("emb", "W", "b"):
        fd = central_diff(loss, getattr(p, name))
        assert np.abs(fd - g[name]).max() < 1e-5, name


def test_adam_zero_grad_and_zero_lr():
    p = params64()
    before = {k: v.copy() for k, v in p.arrays().items()}
    opt = Adam(lr=1e-2)
    for _ in range(3):
        opt.step(p.arrays(), {k: np.zeros_like(v) for k, v in p.arrays().items()})
    assert all(np.array_equal(before[k], v) for k, v in p.arrays().items())
    opt = Adam(lr=0.0)
    opt.step(p.arrays(), {k: np.ones_like(v) for k, v in p.arrays().items()})
    assert all(np.array_equal(before[k], v) for k, v in p.arrays().items())


def test_adam_first_step_is_lr_times_sign():
    w = np.array([1.0, -2.0, 3.0])
    Adam(lr=0.1, eps=0.0).step({"w": w}, {"w": np.array([5.0, -0.1, 2.0])})
    np.testing.assert_allclose(w, [0.9, -1.9, 2.9], rtol=1e-14)


def test_adam_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        Adam().step({"w": np.zeros(3)}, {"w": np.zeros(2)})


def test_ndcg_hand_cases():
    np.testing.assert_allclose(ndcg_at_k([1, 3, 11, 10], 10), [1.0, 0.5, 0.0, 1 / math.log2(11)])


def test_ranks_break_ties_by_item_id():
    scores = np.array([[0.5, 0.9, 0.9, 0.1]])
    assert target_ranks(scores, np.array([2])).tolist() == [2]
    assert target_ranks(scores, np.array([1])).tolist() == [1]
    assert top_k(scores, 2).tolist() == [[1, 2]]


def make_eval_params(V=6, D=2):
    p = ToyEncoderParams.init(V, D, Rng(0), dtype=np.float64)
    return p


def test_evaluate_coverage_at_v_is_one():
    p = make_eval_params()
    pop = PopularityTable(np.array([3, 1, 1, 1, 1, 1]), 8)
    m = evaluate(p, [(np.array([0, 1]), 2)], pop, k=6)
    assert m["coverage"] == 1.0
    assert 0 <= m["ndcg"] <= 1 and 0 <= m["surprisal"] <= 1


def test_evaluate_rank_one_target():
    p = make_eval_params(V=3, D=2)
    p.W[:] = np.eye(2)
    p.emb[:] = [[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]
    p.C[:] = np.array([[0.0, 5.0, -5.0], [0.0, 0.0, 0.0]])
    pop = PopularityTable(np.array([1, 1, 1]), 3)
    m = evaluate(p, [(np.array([0]), 1)], pop, k=2)
    assert m["ndcg"] == 1.0
    assert m["coverage"] == pytest.approx(2 / 3)
    assert m["surprisal"] == pytest.approx(1.0)


def test_evaluate_rejects_empty_popularity():
    with pytest.raises(ValueError):
        evaluate(make_eval_params(), [(np.array([0]), 1)], PopularityTable(np.zeros(6, int), 0))


def test_random_baseline_formula():
    V, k = 2000, 10
    ref = sum(1 / math.log2(r + 1) for r in range(1, k + 1)) / V
    assert random_ndcg_baseline(V, k) == pytest.approx(ref, rel=1e-14)


def test_spearman_textbook_no_ties():
    assert spearman([1, 2, 3, 4, 5], [2, 1, 4, 3, 5]) == pytest.approx(0.8, abs=1e-12)


def test_spearman_average_rank_ties():
    assert spearman([1, 2, 3, 4, 5], [5, 6, 7, 8, 7]) == pytest.approx(8 / math.sqrt(95), abs=1e-12)


def test_spearman_monotone_and_constant():
    assert spearman([1, 2, 3], [0.1, 0.5, 0.7]) == pytest.approx(1.0)
    assert spearman([1, 2, 3], [4, 4, 4]) is None
