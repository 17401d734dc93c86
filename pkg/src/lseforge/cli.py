"""Command-line entry point: ``lseforge {train,sweep,gradhist,filter-sweep,bench}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
import argparse
import json
import os
import sys

from .backend import Backend, parse_backend
from .harness.train import SAMPLERS, SYNTHETIC_DEFAULT, RunConfig, prepare_run, run_epoch

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _backend_arg(text):
    try:
        return parse_backend(text).value
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _eps_list(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("eps values must be non-negative")
    return vals


def _add_run_flags(p, backend=True):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", help="interaction CSV with header user_id,item_id,timestamp")
    src.add_argument("--synthetic", action="store_true", help="use the generated corpus (default)")
    if backend:
        p.add_argument("--backend", type=_backend_arg, default="cce",
                       help="ce, ce_minus, cce, cce_minus or bce")
    p.add_argument("--bs", type=int, default=32)
    p.add_argument("--sl", type=int, default=20)
    p.add_argument("--ns", type=int, default=None, help="negatives per row (sampled backends)")
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    if backend:
        p.add_argument("--filter-eps", type=float, default=None, help="CCE gradient filter")
    p.add_argument("--sampler", choices=SAMPLERS, default=None)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--row-block", type=int, default=128)
    p.add_argument("--col-block", type=int, default=256)
    for name, val in SYNTHETIC_DEFAULT.items():
        p.add_argument(f"--{name.replace('_', '-')}", type=int, default=val,
                       help=f"synthetic corpus size (default {val})")


def build_parser():
    parser = argparse.ArgumentParser(prog="lseforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train and print one JSON line per epoch")
    _add_run_flags(p)

    p = sub.add_parser("sweep", help="run a hyperparameter grid, emit CSV and Spearman table")
    p.add_argument("grid", help="JSON file with bs/sl/ns lists and backends")
    p.add_argument("--out", help="write records CSV here (default: stdout)")
    p.add_argument("--table", help="write the Spearman table JSON here (default: stdout)")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("gradhist", help="histogram of |dL/dC| on one batch")
    _add_run_flags(p)
    p.add_argument("--upstream", type=float, default=1.0, help="scale on the loss gradient")

    p = sub.add_parser("filter-sweep", help="train CCE at several filter thresholds")
    _add_run_flags(p, backend=False)
    p.add_argument("--eps", type=_eps_list, default=None,
                   help="comma-separated thresholds (default 0,1e-8,1e-6,1e-4,1e-2)")

    p = sub.add_parser("bench", help="time compiled vs numpy kernels")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--v", type=int, default=50000)
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--ns", type=int, default=255)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _run_config(args, backend):
    b = parse_backend(backend)
    if args.ns is not None and not b.takes_ns:
        raise UsageError(f"--ns has no effect with --backend {b.value}")
    if args.sampler is not None and not b.samples:
        raise UsageError(f"--sampler has no effect with --backend {b.value}")
    eps = getattr(args, "filter_eps", None)
    if eps is not None and b is not Backend.CCE:
        raise UsageError(f"--filter-eps only applies to --backend cce, not {b.value}")
    if eps is not None and eps < 0:
        raise UsageError("--filter-eps must be non-negative")
    if args.ns is not None and args.ns < 1:
        raise UsageError("--ns must be at least 1")
    if args.epochs < 0 or args.bs < 1 or args.sl < 2 or args.dim < 1:
        raise UsageError("need --epochs >= 0, --bs >= 1, --sl >= 2, --dim >= 1")
    if args.data is not None and not os.path.isfile(args.data):
        raise UsageError(f"data file not found: {args.data}")
    synthetic = {k: getattr(args, k) for k in SYNTHETIC_DEFAULT}
    return RunConfig(
        backend=b.value, bs=args.bs, sl=args.sl, ns=args.ns if args.ns is not None else 63,
        epochs=args.epochs, seed=args.seed, filter_eps=eps or 0.0,
        sampler=args.sampler or "uniform", dim=args.dim, lr=args.lr,
        row_block=args.row_block, col_block=args.col_block, data=args.data,
        synthetic=synthetic,
    )


def _emit(obj, out):
    out.write(json.dumps(obj) + "\n")
    out.flush()


def cmd_train(args, out):
    cfg = _run_config(args, args.backend)
    state = prepare_run(cfg)
    for epoch in range(cfg.epochs):
        _emit(run_epoch(state, epoch), out)


def cmd_gradhist(args, out):
    from .experiments import run_gradhist
    _emit(run_gradhist(_run_config(args, args.backend), args.upstream), out)


def cmd_filter_sweep(args, out):
    from .experiments import DEFAULT_FILTER_EPS, FILTER_FIELDS, records_to_csv, run_filter_sweep
    cfg = _run_config(args, Backend.CCE.value)
    rows = run_filter_sweep(cfg, args.eps or DEFAULT_FILTER_EPS)
    out.write(records_to_csv(rows, FILTER_FIELDS))


def _load_grid(path):
    if not os.path.isfile(path):
        raise UsageError(f"grid file not found: {path}")
    try:
        with open(path) as fh:
            grid = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(grid, dict) or not grid.get("bs") or not grid.get("sl"):
        raise UsageError(f"{path}: grid needs non-empty 'bs' and 'sl' lists")
    try:
        for b in grid.get("backends", ["cce_minus"]):
            parse_backend(b)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    return grid


def sweep_base_config(grid):
    """Shared settings of a grid file (everything except the swept axes)."""
    synthetic = dict(SYNTHETIC_DEFAULT)
    synthetic.update(grid.get("synthetic", {}))
    return RunConfig(epochs=int(grid.get("epochs", 1)), seed=int(grid.get("seed", 0)),
                     sampler=grid.get("sampler", "uniform"), dim=int(grid.get("dim", 32)),
                     lr=float(grid.get("lr", 1e-3)), data=grid.get("data"), synthetic=synthetic)


def cmd_sweep(args, out):
    from .experiments import records_to_csv, run_sweep, spearman_table
    grid = _load_grid(args.grid)
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    records = run_sweep(sweep_base_config(grid), grid, jobs=args.jobs)
    csv_text = records_to_csv(records)
    table = json.dumps(spearman_table(records))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv_text)
    else:
        out.write(csv_text)
    if args.table:
        with open(args.table, "w") as fh:
            fh.write(table + "\n")
    else:
        out.write(table + "\n")


def cmd_bench(args, out):
    from .bench import bench_kernels
    for rec in bench_kernels(args.n, args.v, args.d, args.ns, args.repeat, args.seed):
        _emit(rec, out)


COMMANDS = {"train": cmd_train, "sweep": cmd_sweep, "gradhist": cmd_gradhist,
            "filter-sweep": cmd_filter_sweep, "bench": cmd_bench}


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lseforge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"lseforge {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
