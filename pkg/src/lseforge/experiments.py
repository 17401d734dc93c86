"""Analyses behind the CLI: gradient histograms, grid sweeps, filter sweeps."""
import csv
import io
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .backend import Backend, parse_backend
from .cce import FP16_MIN_SUBNORMAL
from .harness.metrics import spearman
from .harness.model import forward_batch
from .harness.train import prepare_run, run_epoch
from .oracles import ce_full_backward
from .tensor import Rng

HIST_EDGES = (1e-10, 1e-8, 1e-6, 1e-4, 1e-2)

SWEEP_FIELDS = ("bs", "sl", "ns", "backend", "seed", "ndcg10", "coverage10", "surprisal10",
                "retained_bytes", "wall_ms", "status", "error")
SPEARMAN_FEATURES = ("bs", "sl", "ns", "bs*ns", "sl*bs", "ns*sl")
SWEEP_METRICS = ("ndcg10", "coverage10", "surprisal10")
FILTER_FIELDS = ("filter_eps", "ndcg10", "wall_ms", "skipped_fraction")
DEFAULT_FILTER_EPS = (0.0, 1e-8, 1e-6, 1e-4, 1e-2)


def _bin_label(k):
    if k == 0:
        return f"<{HIST_EDGES[0]:g}"
    if k == len(HIST_EDGES):
        return f">={HIST_EDGES[-1]:g}"
    return f"{HIST_EDGES[k - 1]:g}..{HIST_EDGES[k]:g}"


def gradient_histogram(grad):
    """Fractions of ``|grad|`` per log10 bin plus the share below the fp16 minimum."""
    a = np.abs(np.asarray(grad, dtype=np.float64)).ravel()
    idx = np.digitize(a, HIST_EDGES)
    counts = np.bincount(idx, minlength=len(HIST_EDGES) + 1)
    return {
        "n_entries": int(a.size),
        "bins": [{"label": _bin_label(k), "fraction": float(counts[k] / a.size)}
                 for k in range(len(counts))],
        "fp16_min": FP16_MIN_SUBNORMAL,
        "below_fp16_min": float((a < FP16_MIN_SUBNORMAL).mean()),
    }


def classifier_gradient(state, upstream=1.0, batch=0):
    """Full-catalog classifier gradient on one seeded batch (oracle backward)."""
    cfg = state.config
    order = state.rng.substream(3, 10_000 + batch).generator().permutation(len(state.windows))
    picked = [state.windows[k] for k in order[:cfg.bs]]
    trace = forward_batch(state.params, picked)
    E = trace.H.astype(state.params.C.dtype)
    return ce_full_backward(E, state.params.C, trace.targets, upstream).d_classifier


def run_gradhist(cfg, upstream=1.0):
    state = prepare_run(cfg)
    for epoch in range(cfg.epochs):
        run_epoch(state, epoch)
    out = {"backend": parse_backend(cfg.backend).value, "epochs_trained": cfg.epochs,
           "upstream": upstream}
    out.update(gradient_histogram(classifier_gradient(state, upstream)))
    return out


def run_filter_sweep(cfg, eps_values=DEFAULT_FILTER_EPS):
    """Train CCE once per threshold with identical seeds; one row per threshold."""
    rows = []
    for eps in eps_values:
        run_cfg = replace(cfg, backend=Backend.CCE.value, filter_eps=float(eps))
        state = prepare_run(run_cfg)
        wall, skipped = 0.0, []
        for epoch in range(run_cfg.epochs):
            rec = run_epoch(state, epoch)
            wall += rec["wall_ms"]
            skipped.append(rec["skipped_fraction"])
        rows.append({"filter_eps": float(eps), "ndcg10": state.history[-1]["ndcg10"],
                     "wall_ms": wall, "skipped_fraction": float(np.mean(skipped))})
    return rows


def grid_points(grid):
    """Cartesian product of bs x sl x ns x backends (ns collapses to None when unused)."""
    points = []
    for backend in grid.get("backends", ["cce_minus"]):
        b = parse_backend(backend)
        ns_values = grid.get("ns", [63]) if b.takes_ns else [None]
        for bs in grid["bs"]:
            for sl in grid["sl"]:
                for ns in ns_values:
                    points.append({"bs": int(bs), "sl": int(sl),
                                   "ns": None if ns is None else int(ns), "backend": b.value})
    return points


def derived_seed(seed, point):
    b = list(Backend).index(parse_backend(point["backend"]))
    key = Rng(seed).substream(point["bs"], point["sl"], point["ns"] or 0, b).key
    return int(key % (2**31))


def _run_point(args):
    base, point = args
    seed = derived_seed(base.seed, point)
    rec = dict(point, seed=seed, ndcg10=None, coverage10=None, surprisal10=None,
               retained_bytes=None, wall_ms=None, status="ok", error="")
    try:
        cfg = replace(base, backend=point["backend"], bs=point["bs"], sl=point["sl"],
                      ns=point["ns"] if point["ns"] is not None else base.ns, seed=seed)
        state = prepare_run(cfg)
        wall = 0.0
        for epoch in range(cfg.epochs):
            last = run_epoch(state, epoch)
            wall += last["wall_ms"]
        rec.update(ndcg10=last["ndcg10"], coverage10=last["coverage10"],
                   surprisal10=last["surprisal10"], retained_bytes=last["retained_bytes"],
                   wall_ms=wall)
    except Exception as exc:  # a failed run is recorded, the sweep goes on
        rec.update(status="error", error=f"{type(exc).__name__}: {exc}")
    return rec


def run_sweep(base, grid, jobs=1):
    tasks = [(base, p) for p in grid_points(grid)]
    if jobs > 1:
        # spawn: forking after the OpenMP runtime has started aborts the child
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
            return list(pool.map(_run_point, tasks))
    return [_run_point(t) for t in tasks]


def _feature(rec, name):
    vals = [rec[p] for p in name.split("*")]
    if any(v is None for v in vals):
        return None
    return float(np.prod(vals))


def spearman_table(records, metrics=SWEEP_METRICS, features=SPEARMAN_FEATURES):
    """Spearman correlation of each hyperparameter feature with each metric.

    Only successful runs with the feature defined take part; fewer than two
    points or a constant column gives ``None``.
    """
    table = {}
    ok = [r for r in records if r.get("status", "ok") == "ok"]
    for metric in metrics:
        row = {}
        for feat in features:
            pairs = [(_feature(r, feat), r[metric]) for r in ok
                     if _feature(r, feat) is not None and r.get(metric) is not None]
            if len(pairs) < 2:
                row[feat] = None
                continue
            xs, ys = zip(*pairs)
            row[feat] = spearman(xs, ys)
        table[metric] = row
    return table


def records_to_csv(records, fields=SWEEP_FIELDS):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})
    return buf.getvalue()


def read_sweep_csv(text):
    """Parse sweep CSV back into records with typed fields."""
    ints = {"bs", "sl", "ns", "seed", "retained_bytes"}
    floats = {"ndcg10", "coverage10", "surprisal10", "wall_ms"}
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        if tuple(row) != SWEEP_FIELDS:
            raise ValueError(f"unexpected sweep columns {tuple(row)}")
        rec = {}
        for k, v in row.items():
            if v == "":
                rec[k] = "" if k == "error" else None
            elif k in ints:
                rec[k] = int(v)
            elif k in floats:
                rec[k] = float(v)
            else:
                rec[k] = v
        out.append(rec)
    return out
