"""Time the compiled and numpy labeling enumerators on the same random trees.

    python3 benchmarks/bench_kernels.py [--trees 200] [--max-nodes 25]
"""

import argparse
import time

import numpy as np

from fitruth import _pykernels, kernels


def random_masks(rng, max_nodes):
    n = int(rng.integers(1, max_nodes + 1))
    masks = np.zeros(n, dtype=np.uint64)
    for child in range(1, n):
        masks[int(rng.integers(0, child))] |= np.uint64(1 << child)
    return masks


def clock(fn, cases):
    start = time.perf_counter()
    results = [fn(m) for m in cases]
    return time.perf_counter() - start, results


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trees", type=int, default=200)
    parser.add_argument("--max-nodes", type=int, default=25)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    cases = [random_masks(rng, args.max_nodes) for _ in range(args.trees)]
    py_time, py_res = clock(_pykernels.count_consistent_labelings, cases)
    print(f"numpy    {py_time:8.3f} s")
    if kernels.BACKEND != "cython":
        print("compiled extension not built; nothing to compare")
        return
    c_time, c_res = clock(kernels.count_consistent_labelings, cases)
    assert c_res == py_res, "backends disagree"
    print(f"compiled {c_time:8.3f} s  ({py_time / c_time:.1f}x faster, identical results)")


if __name__ == "__main__":
    main()
