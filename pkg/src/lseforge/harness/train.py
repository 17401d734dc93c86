"""Training loop that drives every loss back-end through the same encoder."""
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..backend import Backend, parse_backend
from ..cce import CceConfig, cce_backward, cce_forward
from ..ccem import ccem_backward, ccem_forward
from ..memory import MemoryAccountant
from ..oracles import (bce_forward_backward, ce_full_backward, ce_full_forward,
                       ce_sampled_backward, ce_sampled_forward)
from ..sampler import PopularityTable, sample_popularity, sample_uniform
from ..tensor import Rng
from .data import ingest_csv, make_synthetic, temporal_split
from .metrics import evaluate
from .model import ToyEncoderParams, backward_batch, forward_batch
from .optim import Adam

SAMPLERS = ("uniform", "popularity")

# desk-scale corpus used by the acceptance runs and the CLI's --synthetic
SYNTHETIC_DEFAULT = {"n_items": 2000, "n_users": 1000, "seq_len": 40, "n_clusters": 20}


@dataclass
class TrainConfig:
    bs: int = 32
    sl: int = 20
    ns: int = 63
    filter_eps: float = 0.0
    sampler: str = "uniform"
    row_block: int = 128
    col_block: int = 256

    def __post_init__(self):
        if self.bs < 1 or self.sl < 2:
            raise ValueError("need bs >= 1 and sl >= 2")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}")

    @property
    def cce(self):
        return CceConfig(self.row_block, self.col_block, self.filter_eps)


@dataclass
class EpochReport:
    epoch: int
    backend: str
    mean_loss: float
    wall_time: float
    peak_mem_report: dict
    skipped_fraction: float = 0.0
    n_rows: int = 0


def make_windows(sequences, sl):
    """Cut each sequence into consecutive non-overlapping windows of <= sl items."""
    out = []
    for seq in sequences:
        for s in range(0, seq.shape[0], sl):
            w = seq[s:s + sl]
            if w.shape[0] >= 2:
                out.append(w)
    return out


def draw_negatives(x, ns, n_items, sampler, rng, pop=None):
    if sampler == "popularity":
        return sample_popularity(x, ns, pop, rng)
    return sample_uniform(x, ns, n_items, rng)


def loss_step(backend, E, C, x, inds=None, cfg=None, accountant=None):
    """Forward + backward of one loss back-end; returns ``(loss, GradPair)``."""
    backend = parse_backend(backend)
    cfg = cfg or CceConfig()
    if backend is Backend.CE:
        out = ce_full_forward(E, C, x, accountant)
        return out.loss, ce_full_backward(E, C, x, 1.0, accountant)
    if backend is Backend.CCE:
        out = cce_forward(E, C, x, cfg, accountant)
        return out.loss, cce_backward(E, C, x, out.lse, 1.0, cfg, accountant)
    if inds is None:
        raise ValueError(f"{backend.value} needs a negative index matrix")
    if backend is Backend.CE_MINUS:
        out = ce_sampled_forward(E, C, inds, accountant)
        return out.loss, ce_sampled_backward(E, C, inds, 1.0, accountant)
    if backend is Backend.CCE_MINUS:
        out = ccem_forward(E, C, inds, cfg, accountant)
        return out.loss, ccem_backward(E, C, inds, out.lse, 1.0, cfg, accountant)
    return bce_forward_backward(E, C, x, inds.idx[:, 1], 1.0, accountant)


def train_epoch(params, windows, backend, hyper, adam, rng, epoch=0, pop=None):
    """One pass over ``windows`` in a seeded order; returns an :class:`EpochReport`.

    Negatives are redrawn for every batch from a stream keyed by (epoch, batch),
    so two back-ends run with the same seed see the same index matrices.
    """
    backend = parse_backend(backend)
    n_items = params.n_items
    if hyper.sampler == "popularity" and pop is None:
        raise ValueError("popularity sampling needs a PopularityTable")
    dtype = params.C.dtype
    accountant = MemoryAccountant(dtype_bytes=dtype.itemsize)
    order = rng.substream(3, epoch).generator().permutation(len(windows))
    cfg = hyper.cce
    total_loss, total_rows, skipped = 0.0, 0, []
    t0 = time.perf_counter()
    for bi, s in enumerate(range(0, len(order), hyper.bs)):
        trace = forward_batch(params, [windows[k] for k in order[s:s + hyper.bs]])
        E = trace.H.astype(dtype)
        x = trace.targets
        inds = None
        if backend.samples:
            ns = hyper.ns if backend.takes_ns else 1
            inds = draw_negatives(x, ns, n_items, hyper.sampler, rng.substream(4, epoch, bi), pop)
        loss, grads = loss_step(backend, E, params.C, x, inds, cfg, accountant)
        accountant.free_all()
        skipped.append(grads.skipped_fraction)
        enc = backward_batch(params, trace, grads.d_embeddings)
        enc["C"] = grads.d_classifier
        adam.step(params.arrays(), enc)
        total_loss += loss * x.shape[0]
        total_rows += x.shape[0]
    wall = time.perf_counter() - t0
    return EpochReport(epoch, backend.value, total_loss / max(total_rows, 1), wall,
                       accountant.report(), float(np.mean(skipped)) if skipped else 0.0, total_rows)


@dataclass
class RunConfig:
    backend: str = "cce"
    bs: int = 32
    sl: int = 20
    ns: int = 63
    epochs: int = 1
    seed: int = 0
    filter_eps: float = 0.0
    sampler: str = "uniform"
    dim: int = 32
    lr: float = 1e-3
    row_block: int = 128
    col_block: int = 256
    data: str = None
    synthetic: dict = field(default_factory=lambda: dict(SYNTHETIC_DEFAULT))
    k: int = 10

    def hyper(self):
        return TrainConfig(self.bs, self.sl, self.ns, self.filter_eps, self.sampler,
                           self.row_block, self.col_block)


@dataclass
class RunState:
    config: RunConfig
    split: object
    params: ToyEncoderParams
    adam: Adam
    pop: PopularityTable
    windows: list
    rng: Rng
    history: list = field(default_factory=list)


def prepare_run(cfg):
    rng = Rng(cfg.seed)
    if cfg.data is not None:
        log = ingest_csv(cfg.data)
    else:
        log = make_synthetic(rng=rng, **cfg.synthetic)
    split = temporal_split(log, rng)
    pop = PopularityTable.from_items(split.train_items(), log.n_items)
    params = ToyEncoderParams.init(log.n_items, cfg.dim, rng)
    windows = make_windows(split.train, cfg.sl)
    if not windows:
        raise ValueError("no training windows of length >= 2")
    return RunState(cfg, split, params, Adam(lr=cfg.lr), pop, windows, rng)


def run_epoch(state, epoch):
    cfg = state.config
    rep = train_epoch(state.params, state.windows, cfg.backend, cfg.hyper(), state.adam,
                      state.rng, epoch, state.pop)
    metrics = evaluate(state.params, state.split.test, state.pop, cfg.k, max_len=cfg.sl)
    record = {
        "epoch": epoch,
        "backend": rep.backend,
        "loss": rep.mean_loss,
        "wall_ms": rep.wall_time * 1000.0,
        "retained_bytes": rep.peak_mem_report["retained_bytes"],
        "scratch_bytes": rep.peak_mem_report["scratch_bytes"],
        "ndcg10": metrics["ndcg"],
        "coverage10": metrics["coverage"],
        "surprisal10": metrics["surprisal"],
        "skipped_fraction": rep.skipped_fraction,
    }
    state.history.append(record)
    return record


def train_run(cfg):
    """Prepare data and model, train ``cfg.epochs`` epochs; returns the run state."""
    state = prepare_run(cfg)
    for epoch in range(cfg.epochs):
        run_epoch(state, epoch)
    return state


def config_dict(cfg):
    return asdict(cfg)
