import os

import numpy as np
import pytest

from lseforge.experiments import (SWEEP_FIELDS, derived_seed, gradient_histogram, grid_points,
                                  read_sweep_csv, records_to_csv, spearman_table)

GOLDEN = os.path.join(os.path.dirname(__file__), "data", "sweep_golden.csv")


def test_histogram_bins_partition():
    g = np.array([0.0, 1e-11, 5e-9, 5e-7, 5e-5, 5e-3, 0.5, -2e-8, 6e-8])
    h = gradient_histogram(g)
    fr = [b["fraction"] for b in h["bins"]]
    assert abs(sum(fr) - 1.0) <= 1e-12
    assert np.allclose(np.array(fr) * 9, [2, 1, 3, 1, 1, 1])
    assert h["below_fp16_min"] == pytest.approx(4 / 9)
    assert [b["label"] for b in h["bins"]][0] == "<1e-10"
    assert [b["label"] for b in h["bins"]][-1] == ">=0.01"


def test_zero_gradient_all_in_lowest_bin():
    h = gradient_histogram(np.zeros((4, 5)))
    assert h["bins"][0]["fraction"] == 1.0 and h["below_fp16_min"] == 1.0


def test_grid_points_collapse_ns_for_full_backends():
    pts = grid_points({"bs": [1, 2], "sl": [5], "ns": [3, 4], "backends": ["ce", "ccem"]})
    assert len(pts) == 2 + 4
    assert {p["ns"] for p in pts if p["backend"] == "ce"} == {None}


def test_derived_seed_stable_per_point():
    p = {"bs": 8, "sl": 4, "ns": 3, "backend": "cce_minus"}
    assert derived_seed(0, p) == derived_seed(0, dict(p))
    assert derived_seed(0, p) != derived_seed(0, {**p, "bs": 9})
    assert derived_seed(0, p) != derived_seed(1, p)


def rec(bs, sl, ns, ndcg, status="ok"):
    return {"bs": bs, "sl": sl, "ns": ns, "ndcg10": ndcg, "coverage10": 0.5, "surprisal10": ndcg,
            "status": status}


def test_spearman_monotone_in_bs():
    recs = [rec(bs, 10, 3, 0.1 * bs) for bs in (1, 2, 4, 8)]
    t = spearman_table(recs)
    assert t["ndcg10"]["bs"] == pytest.approx(1.0)
    assert t["ndcg10"]["sl"] is None
    assert t["coverage10"]["bs"] is None


def test_spearman_features_skip_failed_and_missing_ns():
    recs = [rec(1, 1, 1, 0.1), rec(2, 2, 2, 0.2), rec(3, 3, None, 0.3), rec(4, 4, 4, 0.0, "error")]
    t = spearman_table(recs)
    assert t["ndcg10"]["bs"] == pytest.approx(1.0)
    assert t["ndcg10"]["ns*sl"] == pytest.approx(1.0)
    assert set(t["ndcg10"]) == {"bs", "sl", "ns", "bs*ns", "sl*bs", "ns*sl"}


def test_golden_csv_parses():
    with open(GOLDEN) as fh:
        text = fh.read()
    recs = read_sweep_csv(text)
    assert len(recs) == 3
    assert recs[0]["bs"] == 16 and recs[0]["ndcg10"] == 0.0556 and recs[0]["status"] == "ok"
    assert recs[1]["ns"] is None and recs[1]["backend"] == "ce"
    assert recs[2]["ndcg10"] is None and recs[2]["error"].startswith("SamplingError")
    assert records_to_csv(recs) == text


def test_csv_schema_is_fixed():
    assert records_to_csv([]).strip() == ",".join(SWEEP_FIELDS)
    with pytest.raises(ValueError):
        read_sweep_csv("bs,sl\n1,2\n")


def test_failed_point_recorded_and_sweep_continues():
    from lseforge.experiments import run_sweep
    from lseforge.harness.train import RunConfig

    base = RunConfig(epochs=1, synthetic={"n_items": 20, "n_users": 40, "seq_len": 8, "n_clusters": 2})
    recs = run_sweep(base, {"bs": [16], "sl": [4], "ns": [3, 50], "backends": ["cce_minus"]})
    assert [r["status"] for r in recs] == ["ok", "error"]
    assert "SamplingError" in recs[1]["error"]
    assert recs[0]["ndcg10"] is not None
