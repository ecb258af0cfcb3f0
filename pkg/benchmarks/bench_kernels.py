"""Compare the compiled and pure-Python interval kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Times each kernel on random interval sets over 64 words, then one
end-to-end 50-agent random run per backend.
"""

import argparse
import random
import time
import timeit

from mdacheck import _kernels_py, intervals
from mdacheck.runtime import run_random
from mdacheck.synth import SynthParams, build_synthetic


def random_set(rng, n_words=64, k=6):
    out = []
    for _ in range(k):
        lo = rng.randint(1, n_words)
        out.append((lo, min(n_words, lo + rng.randint(0, 4))))
    return _kernels_py.normalize(out, 1)


def bench_kernels(mod, data, repeat):
    sets, pairs = data
    cases = {
        "normalize": lambda: [mod.normalize(s, 1) for s in sets],
        "insert": lambda: [mod.insert(a, 10, 20, 1) for a in sets],
        "union": lambda: [mod.union(a, b, 1) for a, b in pairs],
        "union_many": lambda: mod.union_many(sets, 1),
    }
    return {name: min(timeit.repeat(fn, number=1, repeat=repeat)) for name, fn in cases.items()}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-run", action="store_true", help="kernels only")
    args = ap.parse_args()
    if not intervals.compiled_available():
        raise SystemExit("compiled kernels not built; run: pip install -e . --no-build-isolation")
    rng = random.Random(0)
    sets = [random_set(rng) for _ in range(20_000)]
    pairs = list(zip(sets, sets[1:]))
    data = (sets, pairs)
    py = bench_kernels(_kernels_py, data, args.repeat)
    cy = bench_kernels(intervals._compiled, data, args.repeat)
    print(f"{'kernel':<12}{'python ms':>12}{'compiled ms':>14}{'speedup':>10}")
    for name in py:
        print(f"{name:<12}{py[name] * 1e3:>12.2f}{cy[name] * 1e3:>14.2f}{py[name] / cy[name]:>9.1f}x")
    if args.skip_run:
        return
    cfg = build_synthetic(SynthParams(25, 10, 15))
    for backend in ("python", "compiled"):
        intervals.set_backend(backend)
        t = time.perf_counter()
        _, report = run_random(cfg, seed=1)
        print(f"run_random (25,10,15) {backend:<9} {time.perf_counter() - t:6.2f} s  {report.steps} steps  {report.trace_hash}")


if __name__ == "__main__":
    main()
