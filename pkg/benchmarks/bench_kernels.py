"""Compare the numba and numpy backends of the hot loops.

Both variants are imported side by side from ``coulombgas._kernels``, so the
comparison does not depend on ``COULOMBGAS_DISABLE_NUMBA``. Each row reports
the best wall time over ``--repeat`` runs and the largest difference between
the two backends' outputs.

    python benchmarks/bench_kernels.py --sizes 64 256 --repeat 3
"""

import argparse
import time

import numpy as np

from coulombgas import _kernels as K
from coulombgas._accel import HAS_NUMBA


def _best(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_pair_energy(n, d, repeat, rng):
    x = rng.standard_normal((n, d))
    t_nb, (v_nb, _, _) = _best(lambda: K._pair_energy_nb(x, 0, 0.0), repeat)
    t_np, (v_np, _, _) = _best(lambda: K._pair_energy_np(x, 0, 0.0), repeat)
    return t_nb, t_np, abs(v_nb - v_np) / max(1.0, abs(v_np))


def bench_sweeps(n, d, repeat, rng, nsweep=20):
    x0 = rng.standard_normal((n, d))
    normals = rng.standard_normal((nsweep, n, d))
    uniforms = rng.random((nsweep, n))

    def run(fn):
        x = x0.copy()
        ls = np.array([np.log(0.3 / np.sqrt(n))])
        acc = np.zeros(nsweep, dtype=np.int64)
        coin = np.zeros(1, dtype=np.int64)
        fn(x, 0, 0.0, 1.0, float(n), 2.0, ls, normals, uniforms, False, 0, 0.3, acc, coin)
        return x

    t_nb, x_nb = _best(lambda: run(K._sweeps_nb), repeat)
    t_np, x_np = _best(lambda: run(K._sweeps_np), repeat)
    return t_nb / nsweep, t_np / nsweep, float(np.max(np.abs(x_nb - x_np)))


def bench_point_field(n, d, repeat, rng, m=4096):
    pts = rng.standard_normal((n, d))
    nodes = rng.standard_normal((m, d))
    etas = np.full(n, 0.5 / np.sqrt(n))

    def run(fn):
        val = np.empty(m)
        grad = np.empty((m, d))
        fn(nodes, pts, etas, 0, 0.0, val, grad)
        return val

    t_nb, v_nb = _best(lambda: run(K._point_field_nb), repeat)
    t_np, v_np = _best(lambda: run(K._point_field_np), repeat)
    return t_nb, t_np, float(np.max(np.abs(v_nb - v_np)))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[64, 256])
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if not HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(args.seed)
    # compile the numba variants before timing
    bench_pair_energy(4, args.dim, 1, rng)
    bench_sweeps(4, args.dim, 1, rng, nsweep=1)
    bench_point_field(4, args.dim, 1, rng, m=8)
    print(f"{'kernel':<12}{'N':>6}{'numba [s]':>14}{'numpy [s]':>14}{'speedup':>10}{'max diff':>12}")
    for n in args.sizes:
        for name, fn in (("pair_energy", bench_pair_energy), ("sweep", bench_sweeps),
                         ("point_field", bench_point_field)):
            t_nb, t_np, diff = fn(n, args.dim, args.repeat, rng)
            print(f"{name:<12}{n:>6}{t_nb:>14.3e}{t_np:>14.3e}{t_np / t_nb:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
