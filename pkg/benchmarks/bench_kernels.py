"""Compare the compiled and numpy kernels on the Example 1 workload.

    python3 benchmarks/bench_kernels.py [--paths N] [--repeat R]

Both kernels run the same ensemble; the script checks that the outputs are
bit-identical before reporting timings.
"""

import argparse
import time

import numpy as np

from mtem import kernels
from mtem.experiments import build_example
from mtem.integrator import simulate_ensemble


def best_of(repeat, fn):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--paths", type=int, default=1000)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--workers", type=int, default=None)
    args = parser.parse_args()

    exp = build_example("example1")
    steps = exp.grid.n_steps

    def run(use_numba):
        return simulate_ensemble(exp.problem, exp.policy, exp.grid, 20190101, args.paths,
                                 workers=args.workers, use_numba=use_numba)

    results = {}
    variants = [("numpy", False)] + ([("numba", True)] if kernels.NUMBA_AVAILABLE else [])
    for name, flag in variants:
        run(flag)  # warm-up (JIT compile / cache load)
        results[name] = best_of(args.repeat, lambda: run(flag))

    print(f"example1: {args.paths} paths x {steps} steps, best of {args.repeat}")
    for name, (secs, _) in results.items():
        rate = args.paths * steps / secs / 1e6
        print(f"  {name:6s} {secs:8.3f} s  {rate:7.2f} M steps/s")
    if "numba" in results:
        same = all(np.array_equal(a.states, b.states)
                   for a, b in zip(results["numpy"][1], results["numba"][1]))
        print(f"  speedup {results['numpy'][0] / results['numba'][0]:.1f}x, identical output: {same}")


if __name__ == "__main__":
    main()
