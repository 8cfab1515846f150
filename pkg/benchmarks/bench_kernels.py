"""Times the accelerated distance kernels against the pure-numpy fallback.

Run from the repository root:

  python3 benchmarks/bench_kernels.py
  python3 benchmarks/bench_kernels.py --pairs 500 --min-len 200 --max-len 900
"""

from __future__ import annotations

import argparse
import random
import string
import time

from cmgeval import kernels


def make_pairs(n: int, min_len: int, max_len: int, seed: int):
    rng = random.Random(seed)
    alphabet = string.ascii_lowercase + "     "
    pairs = []
    for _ in range(n):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(min_len, max_len)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randint(min_len, max_len)))
        pairs.append((a, b))
    return pairs


def bench(fn, pairs, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for a, b in pairs:
            fn(a, b)
        best = min(best, time.perf_counter() - start)
    return best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=200)
    parser.add_argument("--min-len", type=int, default=100)
    parser.add_argument("--max-len", type=int, default=700)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    pairs = make_pairs(args.pairs, args.min_len, args.max_len, args.seed)
    backends = ["numpy"] + (["numba"] if kernels.HAS_NUMBA else [])
    if not kernels.HAS_NUMBA:
        print("numba not importable; timing the numpy fallback only")

    results = {}
    for name in backends:
        kernels.set_backend(name)
        kernels.warmup()
        for kernel_name, fn in (("levenshtein", kernels.levenshtein), ("lcs_length", kernels.lcs_length)):
            elapsed = bench(fn, pairs, args.repeats)
            results[(kernel_name, name)] = elapsed

    print(f"{args.pairs} pairs, lengths {args.min_len}-{args.max_len}, best of {args.repeats}")
    print(f"{'kernel':<13} {'backend':<8} {'total s':>9} {'us/pair':>9}")
    for (kernel_name, name), elapsed in results.items():
        print(
            f"{kernel_name:<13} {name:<8} {elapsed:>9.3f} {elapsed / args.pairs * 1e6:>9.1f}"
        )
    for kernel_name in ("levenshtein", "lcs_length"):
        if ("numba" in backends) and (kernel_name, "numpy") in results:
            speedup = results[(kernel_name, "numpy")] / results[(kernel_name, "numba")]
            print(f"{kernel_name}: numba is {speedup:.1f}x the numpy fallback")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
