"""Compare the compiled and pure-Python kernels on representative workloads.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import random
import timeit

import numpy as np

from acc_codesign import _kernels


def random_sets(n_sets, seed=1):
    rng = random.Random(seed)
    out = []
    for _ in range(n_sets):
        n = rng.randint(2, 8)
        period = [rng.choice((10, 20, 40, 50, 100, 200)) for _ in range(n)]
        wcet = [rng.randint(1, max(1, p // 4)) for p in period]
        rank = sorted(range(n), key=lambda i: (period[i], i))
        ranks = [0] * n
        for r, i in enumerate(rank):
            ranks[i] = r
        core = [rng.randrange(2) for _ in range(n)]
        locks = [rng.choice((0, 0, 1, 2, 3)) for _ in range(n)]
        out.append((period, wcet, period, ranks, core, locks, 2, 20_000))
    return out


def plant_args(n):
    return (np.array([0.0, 16.0, 150.0, 0.0]), 0.5, np.full(n, 16.67), 1e-3, 0.3, 0, n,
            np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n))


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = _kernels.backends()
    sets = random_sets(50)
    n = 120_000
    print(f"{'kernel':<22}{'backend':<10}{'best [ms]':>12}")
    for name, mod in backends.items():
        t = min(timeit.repeat(lambda: [mod.simulate_fp(*s) for s in sets],
                              number=1, repeat=args.repeat))
        print(f"{'simulate_fp x50':<22}{name:<10}{t * 1e3:>12.1f}")
    for name, mod in backends.items():
        t = min(timeit.repeat(lambda: mod.integrate_plant(*plant_args(n)),
                              number=1, repeat=args.repeat))
        print(f"{'integrate_plant 120k':<22}{name:<10}{t * 1e3:>12.1f}")
    if len(backends) == 2:
        fast, pure = backends["cython"], backends["python"]
        same = all(fast.simulate_fp(*s) == pure.simulate_fp(*s) for s in sets)
        a, b = plant_args(n), plant_args(n)
        fast.integrate_plant(*a)
        pure.integrate_plant(*b)
        same_plant = all(np.array_equal(x, y) for x, y in zip(a[-4:], b[-4:]))
        print(f"identical results: schedule={same} plant={same_plant}")
    else:
        print("compiled backend not built; only the pure-Python kernels were timed")


if __name__ == "__main__":
    main()
