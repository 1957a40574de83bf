"""Compare the compiled compute core with the numpy fallback.

Times the pooled Gram matrix, the per-row kernel sums and the full
``mmd_unbiased`` call at a few sizes, checks that both backends agree, and
prints one line per (operation, size).

    python benchmarks/bench_core.py [--sizes 200,500,1000] [--p 1000] [--threads 1]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from hdmmd import KernelSpec, PooledGram, _backend, _fallback


def _best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(sizes, p, threads, repeat):
    try:
        compiled = _backend.get_core("compiled")
    except ImportError:
        compiled = None
        print("compiled core not available; timing the fallback only")
    cores = {"python": _fallback}
    if compiled is not None:
        cores["compiled"] = compiled
    kernel = KernelSpec.gaussian(2.0 * p)
    rng = np.random.default_rng(0)
    print(f"{'operation':<14}{'n=m':>6}{'p':>6}" + "".join(f"{c:>12}" for c in cores) + f"{'speedup':>10}")
    for n in sizes:
        X = rng.standard_normal((n, p))
        Y = rng.standard_normal((n, p))
        Z = np.ascontiguousarray(np.vstack([X, Y]))
        G = _fallback.gram(Z, None, 1)
        rows = {
            "gram": lambda c: c.gram(Z, None, threads),
            "kernel_sums": lambda c: c.kernel_row_sums(G, n, kernel.code, kernel.param,
                                                       kernel.bandwidth, threads),
            "mmd_unbiased": lambda c: PooledGram(
                X, Y, threads, backend="compiled" if c is compiled else "python"
            ).mmd(kernel),
        }
        for name, op in rows.items():
            times, outs = {}, {}
            for cname, core in cores.items():
                times[cname], outs[cname] = _best_of(lambda: op(core), repeat)
            if len(outs) == 2:
                a, b = outs["python"], outs["compiled"]
                a = np.concatenate([np.ravel(v) for v in a]) if isinstance(a, tuple) else np.ravel(a)
                b = np.concatenate([np.ravel(v) for v in b]) if isinstance(b, tuple) else np.ravel(b)
                scale = max(1.0, float(np.max(np.abs(a))))
                assert np.max(np.abs(a - b)) <= 1e-9 * scale, f"{name}: backends disagree"
                speed = f"{times['python'] / times['compiled']:>9.2f}x"
            else:
                speed = f"{'-':>10}"
            print(f"{name:<14}{n:>6}{p:>6}" + "".join(f"{times[c]:>11.4f}s" for c in cores) + speed)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="200,500,1000", help="comma-separated n (= m)")
    ap.add_argument("--p", type=int, default=1000, help="dimension")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3, help="best-of repetitions")
    args = ap.parse_args(argv)
    run([int(s) for s in args.sizes.split(",")], args.p, args.threads, args.repeat)


if __name__ == "__main__":
    main()
