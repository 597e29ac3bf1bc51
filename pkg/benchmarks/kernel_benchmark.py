#!/usr/bin/env python3
"""Compare the compiled and pure-Python bit-packing kernels.

Times the raw kernel operations and a full cohort query under each
implementation. Run from a checkout with the package installed:

    python3 benchmarks/kernel_benchmark.py [--users N] [--repeat K]
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from cohortq import kernels
from cohortq.executor import run_query
from cohortq.ingest import GenSpec, generate, sort_and_partition
from cohortq.query import parse, validate
from cohortq.storage import build_chunkset
from cohortq.bench import query_text


def _time(fn, repeat: int) -> float:
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t0)
    return statistics.median(runs)


def kernel_micro(impl_name: str, repeat: int) -> dict[str, float]:
    kernels.set_implementation(impl_name)
    rng = np.random.default_rng(5)
    values = rng.integers(0, 1 << 17, size=1_000_000, dtype=np.int64)
    words = kernels.pack(values, 17)
    out = {
        "pack 1M values": _time(lambda: kernels.pack(values, 17), repeat),
        "unpack_range 1M": _time(lambda: kernels.unpack_range(words, 17, 0, len(values)), repeat),
        "unpack_at x100k": _time(
            lambda: [kernels.unpack_at(words, 17, i) for i in range(0, 1_000_000, 10)],
            repeat,
        ),
        "find_first miss 1M": _time(
            lambda: kernels.find_first(words, 17, 0, len(values), (1 << 17) + 5),
            repeat,
        ),
    }
    return out


def query_macro(impl_name: str, users: int, repeat: int) -> float:
    kernels.set_implementation(impl_name)
    schema, tuples = generate(GenSpec(user_count=users, min_actions=10,
                                      max_actions=50, seed=3))
    chunkset = build_chunkset(schema, sort_and_partition(tuples, 262_144))
    spec = validate(parse(query_text("q3")), schema)
    return _time(lambda: run_query(chunkset, spec), repeat)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--users", type=int, default=3000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    impls = kernels.available()
    print(f"implementations: {', '.join(impls)}")
    micro = {name: kernel_micro(name, args.repeat) for name in impls}
    rows = sorted(micro[impls[0]])
    width = max(len(r) for r in rows) + 2
    header = "kernel op".ljust(width) + "".join(f"{n:>12}" for n in impls)
    print("\n" + header)
    print("-" * len(header))
    for op in rows:
        line = op.ljust(width)
        for name in impls:
            line += f"{micro[name][op] * 1000:>10.2f}ms"
        print(line)

    print(f"\nfull q3 over {args.users} users:")
    for name in impls:
        t = query_macro(name, args.users, args.repeat)
        print(f"  {name}: {t * 1000:.1f}ms")
    kernels.set_implementation(impls[0])


if __name__ == "__main__":
    main()
