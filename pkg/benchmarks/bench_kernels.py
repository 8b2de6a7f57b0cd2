"""
Time the numba kernels against their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel is warmed up once (numba compiles on first call), then timed
as the best of ``--repeat`` runs.  Results are checked for agreement.
"""

import argparse
import time

import numpy as np

from scamr import _kernels
from scamr.gpc import total_degree_indices


def best_time(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    # design matrix: level-2 grid of a 10-D element against the order-2 basis
    basis = total_degree_indices(10, 2)
    ref = rng.uniform(-1, 1, size=(221 * 20, 10))
    yield "legendre_design 10-D p=2", "legendre_design", (ref, basis.nz_dim, basis.nz_deg, 2)

    basis = total_degree_indices(100, 1)
    ref = rng.uniform(-1, 1, size=(201 * 10, 100))
    yield "legendre_design 100-D p=1", "legendre_design", (ref, basis.nz_dim, basis.nz_deg, 1)

    pts = rng.random((200_000, 20))
    lo, hi = np.full(20, 0.25), np.full(20, 0.9)
    yield "in_box 200k x 20-D", "in_box", (pts, lo, hi, 1e-11)

    # point location over a 16 x 16 leaf grid
    edges = np.linspace(0, 1, 17)
    lo = np.array([[a, b] for a in edges[:-1] for b in edges[:-1]])
    hi = lo + 1.0 / 16
    closed = hi >= 1.0
    q = rng.random((500_000, 2))
    yield "locate_boxes 500k / 256 leaves", "locate_boxes", (q, lo, hi, closed)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if _kernels.numba_kernels is None:
        print("numba is not installed; only the numpy path is available")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<34}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for label, name, kargs in cases(rng):
        f_np = getattr(_kernels.numpy_kernels, name)
        f_nb = getattr(_kernels.numba_kernels, name)
        out_np, out_nb = f_np(*kargs), f_nb(*kargs)
        if out_np.dtype == bool:
            assert np.array_equal(out_np, out_nb), label
        else:
            np.testing.assert_allclose(out_nb, out_np, rtol=1e-12, atol=1e-12, err_msg=label)
        t_np = best_time(f_np, kargs, args.repeat)
        t_nb = best_time(f_nb, kargs, args.repeat)
        print(f"{label:<34}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
