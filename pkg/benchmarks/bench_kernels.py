"""Time the compiled kernels against the pure-Python fallback on identical inputs.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from gwperc import _pykernels, rng
from gwperc.offspring import parse_spec

try:
    from gwperc import _kernels
except ImportError:  # pragma: no cover
    _kernels = None

SPEC = parse_spec("unif:1:3")
SALTS = rng.child_salts(len(SPEC.cdf))
ROOT = np.uint64(rng.derive_key(1, "tree", 0))


def cases():
    roots = np.full(2000, ROOT, dtype=np.uint64)
    pkeys = rng.derive_keys(7, "perc", 0, 2000)
    ikeys = rng.derive_keys(7, "iic", 0, 20)
    empty_k, empty_v = np.zeros(0, dtype=np.uint64), np.zeros(0)
    return {
        "cluster_sizes (2000 runs, n=64)":
            lambda k: k.cluster_sizes(roots, pkeys, SPEC.cdf, SALTS, 0.5, 64, 10**9),
        "descendant_count (depth 14)":
            lambda k: k.descendant_count(ROOT, SPEC.cdf, SALTS, 14),
        "iic_run (20 runs, n=64, lookahead 6)":
            lambda k: k.iic_run(roots[:20], ikeys, SPEC.cdf, SALTS, 0.5, 64, 6, _pykernels.MODE_RELATIVE,
                                empty_k, empty_v, False, 10**9),
    }


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json")
    args = ap.parse_args()
    if _kernels is None:
        raise SystemExit("compiled extension not built; run pip install -e . first")
    rows = []
    for name, fn in cases().items():
        fast = best_of(lambda: fn(_kernels), args.repeat)
        slow = best_of(lambda: fn(_pykernels), args.repeat)
        rows.append({"kernel": name, "compiled_s": fast, "python_s": slow, "speedup": slow / fast})
    width = max(len(r["kernel"]) for r in rows)
    print(f"{'kernel':<{width}}  {'compiled':>10}  {'python':>10}  {'speedup':>8}")
    for r in rows:
        print(f"{r['kernel']:<{width}}  {r['compiled_s']:>9.4f}s  {r['python_s']:>9.4f}s  {r['speedup']:>7.0f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
