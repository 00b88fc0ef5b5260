"""Numba loops vs numpy for the nodal kernels, plus one end-to-end solver run.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--sizes 64 128 256]

Kernel timings call both variants directly, so one process covers both.
The end-to-end row runs a short nonlinear scenario in two subprocesses, one
per value of KUZNETSOV_NUMBA, because the switch is read at import time.
"""
import argparse
import os
import subprocess
import sys
import time
import timeit

import numpy as np

from kuznetsov import Domain, kernels
from kuznetsov._accel import HAVE_NUMBA

E2E = """
import time
from kuznetsov.scenarios import preset
from kuznetsov.experiments import simulate
_, cfg = preset("nonlinear-small-data")
cfg = cfg.with_overrides(solver={"t_end": 4.0})
simulate(cfg)
t0 = time.perf_counter()
simulate(cfg)
print(time.perf_counter() - t0)
"""


def cases(n):
    dom = Domain.rectangle(1.0, 1.0, n)
    rng = np.random.default_rng(0)
    N = dom.n_nodes
    u = rng.standard_normal(N)
    gu = rng.standard_normal((N, 2))
    gw = rng.standard_normal((N, 2))
    v = rng.standard_normal((N, 2))
    h = np.asarray(dom.h, dtype=float)
    disk = Domain.disk(1.0, n)
    xy = np.ascontiguousarray(disk.coords)
    hd = float(disk.h[0])
    return {
        "gradient": (lambda f: f(u, dom.nbr, h), kernels.gradient_loops, kernels.gradient_numpy),
        "second_pure": (lambda f: f(u, dom.nbr, h), kernels.second_pure_loops,
                        kernels.second_pure_numpy),
        "lp_sum": (lambda f: f(gu, dom.cell_volume, 3.0), kernels.lp_sum_loops,
                   kernels.lp_sum_numpy),
        "quadratic_source": (lambda f: f(u, gu, gw, v, 1.0, 1.0, 1.0),
                             kernels.quadratic_source_loops, kernels.quadratic_source_numpy),
        "disk_cell_fraction": (lambda f: f(xy, hd, 1.0, 8), kernels.disk_cell_fraction_loops,
                               kernels.disk_cell_fraction_numpy),
    }, N


def best(call, repeat):
    call()  # warm-up / compile
    return min(timeit.repeat(call, number=1, repeat=repeat))


def end_to_end():
    out = {}
    for flag in ("1", "0"):
        env = dict(os.environ, KUZNETSOV_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True,
                             text=True, check=True)
        out[flag] = float(res.stdout.strip().splitlines()[-1])
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba unavailable or disabled: 'loops' rows are plain Python")
    print(f"{'kernel':<20}{'nodes':>8}{'loops [ms]':>13}{'numpy [ms]':>13}{'speed-up':>10}")
    for n in args.sizes:
        table, N = cases(n)
        for name, (call, loops, vec) in table.items():
            a = np.asarray(call(loops))
            b = np.asarray(call(vec))
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12), name
            t_loop = best(lambda: call(loops), args.repeat)
            t_np = best(lambda: call(vec), args.repeat)
            print(f"{name:<20}{N:>8}{1e3 * t_loop:>13.3f}{1e3 * t_np:>13.3f}"
                  f"{t_np / t_loop:>10.2f}")
    if not args.skip_e2e:
        t0 = time.perf_counter()
        e2e = end_to_end()
        print(f"\nnonlinear run, t_end=4: numba {e2e['1']:.3f}s, numpy {e2e['0']:.3f}s "
              f"(ratio {e2e['0'] / e2e['1']:.2f}; {time.perf_counter() - t0:.1f}s wall)")


if __name__ == "__main__":
    main()
