import numpy as np
import pytest

from helpers import instance
from lseforge.backend import Backend
from lseforge.harness.train import loss_step
from lseforge.memory import (INDEX, RETAINED, AccountingError, MemoryAccountant, MemoryModel,
                             peak_bytes, peak_scalars)
from lseforge.sampler import sample_uniform
from lseforge.tensor import Rng


def test_ce_logits_at_million_items():
    N = 256 * 100
    m = MemoryModel(Backend.CE, N=N, V=10**6, D=256)
    retained, _, _ = peak_scalars(m)
    assert retained - N == 2.56e10
    assert (retained - N) * 4 == 102_400_000_000
    cce = peak_bytes(MemoryModel(Backend.CCE, N=N, V=10**6, D=256))
    assert cce["retained"] == 2 * 25600 * 4 == 204_800
    assert 1 - cce["retained"] / peak_bytes(m)["retained"] > 0.99999


def test_single_cell_ce():
    assert peak_bytes(MemoryModel("ce", 1, 1, 1))["retained"] == 8


def test_cce_retained_independent_of_v():
    vals = {peak_bytes(MemoryModel("cce", 64, V, 16))["retained"] for V in (100, 1000, 10_000)}
    assert vals == {2 * 64 * 4}


def test_ns_required_for_sampled():
    with pytest.raises(ValueError):
        MemoryModel("cce_minus", 4, 10, 2)
    with pytest.raises(ValueError):
        MemoryModel("cce", 4, 10, 2, ns=3)
    MemoryModel("bce", 4, 10, 2, ns=1)


def test_index_entries_cost_eight_bytes():
    b = peak_bytes(MemoryModel("cce_minus", 10, 100, 4, ns=7))
    assert b["retained"] == 2 * 10 * 4 + 10 * 8 * 8


def test_nested_tags_peak_is_max_over_time():
    acc = MemoryAccountant()
    acc.alloc("a", 10, RETAINED)
    acc.alloc("b", 5, RETAINED)
    acc.free("b")
    acc.alloc("c", 3, RETAINED)
    acc.free_all()
    rep = acc.report()
    assert rep["retained_scalars"] == 15
    assert rep["tags"] == {"a": 10, "b": 5, "c": 3}
    acc.check_balanced()


def test_unbalanced_tags_raise():
    acc = MemoryAccountant()
    acc.alloc("x", 1)
    with pytest.raises(AccountingError):
        acc.alloc("x", 1)
    with pytest.raises(AccountingError):
        acc.free("y")
    with pytest.raises(AccountingError):
        acc.check_balanced()
    with pytest.raises(ValueError):
        acc.alloc("z", 1, "heap")


def test_retained_bytes_mix_floats_and_indices():
    acc = MemoryAccountant(dtype_bytes=4)
    acc.alloc("f", 3, RETAINED)
    acc.alloc("i", 2, INDEX)
    assert acc.report()["retained_bytes"] == 3 * 4 + 2 * 8


def test_cce_forward_small_report():
    from lseforge.cce import cce_forward

    E, C, x = instance(0, 8, 4, 16, dtype=np.float32)
    acc = MemoryAccountant()
    cce_forward(E, C, x, accountant=acc)
    assert acc.report()["retained_scalars"] == 16


def test_ce_report_is_nv_plus_n():
    E, C, x = instance(0, 6, 3, 11, dtype=np.float32)
    acc = MemoryAccountant()
    loss_step("ce", E, C, x, accountant=acc)
    assert acc.report()["retained_scalars"] == 6 * 11 + 6


def random_configs(n=20, seed=0):
    gen = np.random.default_rng(seed)
    out = []
    for k in range(n):
        b = list(Backend)[k % len(Backend)]
        N, D = int(gen.integers(1, 40)), int(gen.integers(1, 9))
        V = int(gen.integers(2, 300))
        ns = int(gen.integers(0, min(V - 1, 40) + 1)) if b.takes_ns else (1 if b is Backend.BCE else None)
        rb, cb = int(gen.integers(1, 64)), int(gen.integers(1, 128))
        out.append(MemoryModel(b, N, V, D, ns, 4, rb, cb))
    return out


def instrumented(model, seed=0):
    from lseforge.cce import CceConfig

    E, C, x = instance(seed, model.N, model.D, model.V, dtype=np.float32)
    inds = None
    if model.backend.samples:
        inds = sample_uniform(x, model.ns, model.V, Rng(seed))
    acc = MemoryAccountant(4)
    loss_step(model.backend, E, C, x, inds, CceConfig(model.row_block, model.col_block), acc)
    return acc.report()


@pytest.mark.parametrize("model", random_configs(), ids=lambda m: f"{m.backend.value}-N{m.N}-V{m.V}")
def test_instrumented_equals_prediction(model):
    rep = instrumented(model)
    pred = peak_bytes(model)
    assert rep["retained_bytes"] == pred["retained"]
    assert rep["scratch_bytes"] == pred["scratch"]
