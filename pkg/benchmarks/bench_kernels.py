"""Compare the compiled kernel core against the NumPy fallback.

Usage: python3 benchmarks/bench_kernels.py [--rows N] [--repeats K]

Times the two hot kernels on representative shapes: the correction-integral
integrand fill (dominates every quadrature call) and the derivative-kernel
grids behind the c3/c4 suprema.  With only one backend built, reports that
backend alone.
"""

import argparse
import math
import time

import numpy as np

from spahd._core import available_backends, load_backend


def time_call(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_integrand(mod, rows, d, repeats):
    rng = np.random.default_rng(0)
    nodes = rng.normal(size=(rows, d)) * 0.3
    weights = rng.uniform(0.5, 1.0, rows)
    q = np.linalg.qr(rng.normal(size=(d, d)))[0]
    m1 = q @ np.diag(rng.uniform(0.6, 1.0, d)) @ q.T
    v2 = rng.normal(size=d) * 0.6
    out = np.empty(rows, dtype=np.complex128)
    call = lambda: mod.corr_integrand_fill(
        nodes, weights, m1, v2, 0.46, 0.89, 200.0, out
    )
    call()  # warm up
    return time_call(call, repeats)


def bench_c34(mod, side, repeats):
    alphas = np.repeat(np.linspace(-1.0, 1.0, side), side)
    betas = np.tile(np.linspace(-1.2, 1.2, side), side)
    out3 = np.empty(alphas.size)
    out4 = np.empty(alphas.size)
    call = lambda: mod.c34_kernel_grids(alphas, betas, out3, out4)
    call()
    return time_call(call, repeats)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=1_000_000,
                        help="largest integrand batch (default 1e6)")
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats, best of k (default 5)")
    args = parser.parse_args()

    backends = available_backends()
    mods = {name: load_backend(name) for name in backends}
    if len(backends) == 1:
        print(f"only the {backends[0]!r} backend is available; "
              "build the extension to compare")

    sizes = [args.rows // 16, args.rows // 4, args.rows]
    print(f"{'kernel':<28} {'shape':<16} " +
          " ".join(f"{name:>12}" for name in backends) +
          ("  speedup" if len(backends) == 2 else ""))
    for d in (1, 2, 3):
        for rows in sizes:
            times = [bench_integrand(mods[b], rows, d, args.repeats)
                     for b in backends]
            cells = " ".join(f"{rows / t / 1e6:>9.1f} M/s" for t in times)
            tail = (f"  {times[1] / times[0]:>6.2f}x"
                    if len(times) == 2 else "")
            print(f"{'corr_integrand_fill':<28} {f'd={d} rows={rows}':<16} "
                  f"{cells}{tail}")
    for side in (401, 801):
        times = [bench_c34(mods[b], side, args.repeats) for b in backends]
        cells = " ".join(f"{side * side / t / 1e6:>9.1f} M/s" for t in times)
        tail = f"  {times[1] / times[0]:>6.2f}x" if len(times) == 2 else ""
        print(f"{'c34_kernel_grids':<28} {f'{side}x{side}':<16} {cells}{tail}")


if __name__ == "__main__":
    main()
