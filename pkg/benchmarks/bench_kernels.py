"""Time the compiled kernels against their numpy twins on identical inputs.

    python3 benchmarks/bench_kernels.py [--repeat 3]

The first compiled call (JIT or cache load) is excluded from the timings.
"""

import argparse
import time

import numpy as np

from lcgeom import kernels
from lcgeom.bodies import cube, simplex


def _best(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    gen = np.random.default_rng(0)

    A = gen.standard_normal((32, 32))
    M = A + A.T
    yield "jacobi_eigh 32x32", (kernels._jacobi_eigh_nb, kernels._jacobi_eigh_np), (M, 1e-14, 100)

    body = simplex(6)
    X = gen.uniform(-0.5, 1.5, (200_000, 6))
    yield "inside_many 200k pts, simplex n=6", (kernels._inside_many_nb, kernels._inside_many_np), \
        (X, *body.program.kernel_args())

    body = cube(4)
    S, C = 400, 16
    dirs = gen.standard_normal((S, C, 4))
    us = gen.random((S, C))
    reach = 2 * body.R_out * (1 + 1e-9)
    steps = kernels._bisection_steps(reach, 1e-9 * body.R_out)
    yield f"har_chains {C} chains x {S} steps, cube n=4", \
        (kernels._har_chains_nb, kernels._har_chains_np), \
        (np.zeros((C, 4)), dirs, us, *body.program.kernel_args(), reach, steps, 16, 4)

    U = gen.standard_normal((10, 4))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    V = np.vstack([U, -U]).T
    P = gen.uniform(-1, 1, (2000, 4))
    yield "fw_hull 2000 pts, 20 vertices n=4", (kernels._fw_hull_nb, kernels._fw_hull_np), \
        (V, P, 1e-8, 20000)

    Y = gen.standard_normal((100_000, 16))
    Z = gen.standard_normal((64, 16))
    yield "dir_moments 100k x 64 dirs p=3", (kernels._dir_moments_nb, kernels._dir_moments_np), \
        (Y, Z, 3.0)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'kernel':48s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, (nb, np_), inputs in cases():
        t_nb = _best(lambda: nb(*inputs), args.repeat)
        t_np = _best(lambda: np_(*inputs), args.repeat)
        print(f"{name:48s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
