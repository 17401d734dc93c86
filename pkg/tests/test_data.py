import numpy as np
import pytest

from lseforge.harness.data import (DataError, InteractionLog, check_no_leakage, ingest_csv,
                                   make_synthetic, nearest_rank_quantile, temporal_split)
from lseforge.tensor import Rng


def write(tmp_path, text, name="log.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_single_user_fixture(tmp_path):
    p = write(tmp_path, "user_id,item_id,timestamp\n7,100,3\n7,200,1\n7,100,2\n")
    log = ingest_csv(p)
    assert log.n_users == 1 and log.n_items == 2
    assert log.ts.tolist() == [1, 2, 3]
    assert log.items.tolist() == [1, 0, 0]
    assert (tmp_path / "log.vocab.csv").read_text().splitlines() == [
        "item_id,dense_index", "100,0", "200,1"]


def test_duplicates_kept(tmp_path):
    p = write(tmp_path, "user_id,item_id,timestamp\n1,5,1\n1,5,1\n1,6,2\n")
    assert len(ingest_csv(p)) == 3


def test_out_of_order_rows_sorted(tmp_path):
    p = write(tmp_path, "user_id,item_id,timestamp\n2,1,5\n1,1,9\n2,2,1\n1,3,4\n")
    log = ingest_csv(p)
    assert log.users.tolist() == [0, 0, 1, 1]
    assert log.ts.tolist() == [4, 9, 1, 5]


def test_users_below_two_events_dropped(tmp_path):
    p = write(tmp_path, "user_id,item_id,timestamp\n1,1,1\n2,1,2\n2,2,3\n")
    log = ingest_csv(p)
    assert log.n_users == 1 and log.user_ids.tolist() == [2]


@pytest.mark.parametrize("body,msg", [
    ("", "empty"),
    ("user,item,ts\n1,2,3\n", ":1:"),
    ("user_id,item_id,timestamp\n1,2,3\n1,2\n", ":3:"),
    ("user_id,item_id,timestamp\n1,2,3\n1,x,4\n", ":3:"),
])
def test_malformed_files(tmp_path, body, msg):
    with pytest.raises(DataError, match=msg):
        ingest_csv(write(tmp_path, body))


def test_nearest_rank_quantile():
    assert nearest_rank_quantile(np.arange(1, 11), 0.9) == 9
    assert nearest_rank_quantile([5], 0.9) == 5
    assert nearest_rank_quantile(np.arange(1, 21), 0.9) == 18
    # 0.9 * 30 is 27.000000000000004 in floating point; nearest rank is 27
    assert nearest_rank_quantile(np.arange(1, 31), 0.9) == 27


def ten_event_log():
    # user 0: ts 1..7 then 10; user 1: ts 8; user 2: ts 9
    users = [0] * 8 + [1, 2]
    items = [10, 11, 12, 13, 14, 15, 16, 17, 20, 30]
    ts = [1, 2, 3, 4, 5, 6, 7, 10, 8, 9]
    return InteractionLog.from_arrays(users, items, ts)


def test_ten_event_split_by_hand():
    log = ten_event_log()
    s = temporal_split(log, Rng(0))
    assert s.cutoff_ts == 9
    # only user 0 has >= 2 pool events, so the 5% draw picks exactly them
    assert s.valid_users.tolist() == [0]
    assert len(s.valid) == 1
    prefix, target = s.valid[0]
    assert prefix.tolist() == [0, 1, 2, 3, 4, 5] and target == 6
    assert [t.tolist() for t in s.train] == [[0, 1, 2, 3, 4, 5]]
    assert len(s.test) == 1
    prefix, target = s.test[0]
    assert prefix.tolist() == [0, 1, 2, 3, 4, 5, 6] and target == 7
    assert s.test_users.tolist() == [0]
    check_no_leakage(s)


def test_single_post_cutoff_user_excluded_from_test():
    log = InteractionLog.from_arrays([0, 0, 0, 1], [1, 2, 3, 4], [1, 2, 3, 100])
    s = temporal_split(log, Rng(0), quantile=0.75)
    assert s.cutoff_ts == 3 and s.test == []


def test_single_timestamp_is_degenerate():
    log = InteractionLog.from_arrays([0, 0, 1], [1, 2, 3], [5, 5, 5])
    with pytest.raises(DataError, match="timestamp"):
        temporal_split(log, Rng(0))


def test_validation_draw_reproducible_and_five_percent():
    log = make_synthetic(200, 400, 12, 5, Rng(3))
    a = temporal_split(log, Rng(11))
    b = temporal_split(log, Rng(11))
    assert np.array_equal(a.valid_users, b.valid_users)
    eligible = sum(1 for s in log.sequences() if (log.ts[s] <= a.cutoff_ts).sum() >= 2)
    assert len(a.valid_users) == round(0.05 * eligible)


def test_no_leakage_on_synthetic_corpus():
    log = make_synthetic(2000, 1000, 40, 20, Rng(0))
    s = temporal_split(log, Rng(0))
    check_no_leakage(s)
    train = set(np.concatenate(s.train_events).tolist())
    assert train.isdisjoint(s.test_events) and train.isdisjoint(s.valid_events)
    assert all(log.ts[e] > s.cutoff_ts for e in s.test_events)
    assert all(log.ts[e] <= s.cutoff_ts for e in train)


def test_leak_detector_fires():
    s = temporal_split(ten_event_log(), Rng(0))
    s.train_events.append(np.array([s.test_events[0]]))
    with pytest.raises(DataError, match="leaked"):
        check_no_leakage(s)


def test_synthetic_reproducible_and_shaped():
    a = make_synthetic(100, 30, 15, 4, Rng(5))
    b = make_synthetic(100, 30, 15, 4, Rng(5))
    assert np.array_equal(a.items, b.items) and np.array_equal(a.ts, b.ts)
    assert len(a) == 450 and a.n_items == 100 and a.n_users == 30
    assert len(np.unique(a.ts)) == 450


def test_one_cluster_follows_zipf():
    log = make_synthetic(20, 2000, 50, 1, Rng(1), stay_prob=1.0)
    freq = np.bincount(log.items, minlength=20) / len(log)
    ref = 1 / np.arange(1, 21)
    ref /= ref.sum()
    np.testing.assert_allclose(freq, ref, atol=0.01)
