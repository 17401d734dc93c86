"""Compare the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 2000 --v 50000 --d 32 --ns 255]
"""
import argparse

from lseforge.bench import bench_kernels


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--v", type=int, default=50000)
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--ns", type=int, default=255)
    p.add_argument("--repeat", type=int, default=3)
    a = p.parse_args()
    recs = bench_kernels(a.n, a.v, a.d, a.ns, a.repeat)
    by = {(r["path"], r["op"]): r["wall_ms"] for r in recs}
    ops = sorted({r["op"] for r in recs})
    print(f"N={a.n} V={a.v} D={a.d} ns={a.ns}")
    print(f"{'op':<14}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for op in ops:
        nb, npy = by.get(("numba", op)), by[("numpy", op)]
        if nb is None:
            print(f"{op:<14}{'-':>12}{npy:>12.1f}{'-':>10}")
        else:
            print(f"{op:<14}{nb:>12.1f}{npy:>12.1f}{npy / nb:>10.2f}")


if __name__ == "__main__":
    main()
