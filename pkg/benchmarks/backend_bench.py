"""Compare the compiled and pure-numpy kernel backends on a large workload.

Times each hot kernel at d = 10,000 (median of repeated calls, after a
warm-up pass so compilation is excluded) and prints a per-kernel table with
the speedup of the compiled version. Run directly:

    python benchmarks/backend_bench.py [--d 10000] [--repeats 50]
"""

import argparse
import time

import numpy as np

from fmhsdm import kernels

KERNELS = (
    "ball_project",
    "hyperplane_project",
    "block_mean_tile",
    "diag_resolvent",
    "half_update",
)


def make_args(name, d, rng):
    x = rng.standard_normal(d)
    if name == "ball_project":
        return (x, rng.standard_normal(d), 1.5)
    if name == "hyperplane_project":
        a = rng.standard_normal(d)
        return (x, a, 1.0, float(np.dot(a, a)))
    if name == "block_mean_tile":
        return (np.tile(x, 3), 3)
    if name == "diag_resolvent":
        return (x, rng.uniform(0.1, 10.0, size=d), 0.5)
    return (
        x,
        rng.standard_normal(d),
        rng.standard_normal(d),
        rng.standard_normal(d),
        rng.standard_normal(d),
        0.1,
    )


def time_call(func, args, repeats):
    func(*args)  # warm-up / compile
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        func(*args)
        samples.append(time.perf_counter() - t0)
    return float(np.median(samples))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--d", type=int, default=10000)
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    print("active backend: %s" % kernels.BACKEND)
    print("%-20s %12s %12s %9s" % ("kernel", "numpy (us)", "numba (us)", "speedup"))
    for name in KERNELS:
        call_args = make_args(name, args.d, rng)
        t_np = time_call(getattr(kernels, name + "_numpy"), call_args, args.repeats)
        t_nb = time_call(getattr(kernels, name + "_numba"), call_args, args.repeats)
        print(
            "%-20s %12.1f %12.1f %8.2fx"
            % (name, t_np * 1e6, t_nb * 1e6, t_np / t_nb if t_nb > 0 else float("inf"))
        )


if __name__ == "__main__":
    main()
