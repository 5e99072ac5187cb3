"""Time the numba kernels against the pure-numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py``.  Each kernel is warmed up
once (numba compiles on first call), then timed as the best of several
repeats.  Outputs are compared so a speedup never hides a wrong answer.
"""
import argparse
import time

import numpy as np

from rwmhcert import kernels
from rwmhcert.grid import symmetric_grid
from rwmhcert.proposal import gaussian_proposal
from rwmhcert.target import standard_normal_bundle


def best_of(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_assemble(n_cells, repeats):
    bundle = standard_normal_bundle(1)
    prop = gaussian_proposal(1.0, 1)
    grid = symmetric_grid(1, 8.0, n_cells)
    c = grid.centers
    lf = np.asarray(bundle.target.logpdf(c), dtype=float)
    args = (c, lf, grid.cell_volume, prop.logq_coeffs)
    results = {}
    for flag in (True, False):
        kernels.assemble_kernel_matrix(*args, use_numba=flag)
        t = best_of(lambda: kernels.assemble_kernel_matrix(*args, use_numba=flag), repeats)
        results[flag] = (t, kernels.assemble_kernel_matrix(*args, use_numba=flag))
    diff = float(np.max(np.abs(results[True][1] - results[False][1])))
    return results[True][0], results[False][0], diff


def bench_chain(steps, repeats):
    bundle = standard_normal_bundle(1)
    spec = bundle.target.kernel
    rng = np.random.default_rng(0)
    inc = rng.standard_normal((steps, 1))
    log_u = np.log(rng.random(steps))
    x0 = np.zeros(1)
    results = {}
    for flag in (True, False):
        kernels.mh_chain(spec, x0, inc, log_u, use_numba=flag)
        t = best_of(lambda: kernels.mh_chain(spec, x0, inc, log_u, use_numba=flag), repeats)
        results[flag] = (t, kernels.mh_chain(spec, x0, inc, log_u, use_numba=flag)[0])
    diff = float(np.max(np.abs(results[True][1] - results[False][1])))
    return results[True][0], results[False][0], diff


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, nargs="+", default=[161, 321, 641])
    ap.add_argument("--steps", type=int, nargs="+", default=[10_000, 100_000])
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)

    if not kernels.HAVE_NUMBA:
        print("numba unavailable or disabled; both columns time the numpy path")
    print(f"{'kernel':<10}{'size':>10}{'numba [s]':>14}{'numpy [s]':>14}{'speedup':>10}{'max diff':>12}")
    for n in args.cells:
        tn, tp, d = bench_assemble(n, args.repeats)
        print(f"{'assemble':<10}{n:>10}{tn:>14.5f}{tp:>14.5f}{tp / tn:>10.1f}{d:>12.2e}")
    for s in args.steps:
        tn, tp, d = bench_chain(s, args.repeats)
        print(f"{'chain':<10}{s:>10}{tn:>14.5f}{tp:>14.5f}{tp / tn:>10.1f}{d:>12.2e}")


if __name__ == "__main__":
    main()
