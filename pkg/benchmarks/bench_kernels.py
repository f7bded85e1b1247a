"""Benchmark the compiled kernels against the pure-numpy fallback.

Times the two hot kernels (per-component log densities and weighted
moments) at the production shape (K=400 components, D=784 features,
batch 100) and a couple of smaller shapes, and reports the speedup.

Run:  python3 benchmarks/bench_kernels.py [--repeats 50]
"""

import argparse
import time

import numpy as np

from gmm_replay import _kernels_np

try:
    from gmm_replay import _kernels_cy
except ImportError:
    _kernels_cy = None

SHAPES = [
    (100, 400, 784),   # production: MNIST-sized batch step
    (100, 25, 784),    # small grid
    (200, 9, 2),       # synthetic toy
]


def make_inputs(b, k, d, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(b, d))
    mu = rng.uniform(0.0, 1.0, size=(k, d))
    log_sd = rng.uniform(np.log(0.05), np.log(0.3), size=(k, d))
    gamma = rng.dirichlet(np.ones(k), size=b)
    return x, mu, log_sd, gamma


def timeit(fn, repeats):
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    if _kernels_cy is None:
        print("compiled extension not importable; only the numpy backend runs")
    backends = [("numpy", _kernels_np)]
    if _kernels_cy is not None:
        backends.append(("cython", _kernels_cy))

    header = f"{'kernel':<24}{'shape (B,K,D)':<18}" + "".join(
        f"{name + ' (ms)':>14}" for name, _ in backends
    )
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    for b, k, d in SHAPES:
        x, mu, log_sd, gamma = make_inputs(b, k, d)
        for kernel, call_args in (
            ("component_log_densities", (x, mu, log_sd)),
            ("weighted_moments", (gamma, x)),
        ):
            times = [
                timeit(lambda m=mod, ka=call_args: getattr(m, kernel)(*ka),
                       args.repeats)
                for _, mod in backends
            ]
            row = f"{kernel:<24}{f'{b},{k},{d}':<18}" + "".join(
                f"{t * 1e3:>14.3f}" for t in times
            )
            if len(times) == 2:
                row += f"{times[0] / times[1]:>9.2f}x"
            print(row)


if __name__ == "__main__":
    main()
