"""Compare the compiled tape evaluator against the pure-Python fallback.

Usage:
    python3 benchmarks/bench_eval.py [--points 20000] [--repeat 3]

Evaluates the gradient tapes of the corpus functions at a batch of random
points with both backends and reports throughput and speedup.
"""

import argparse
import time

import numpy as np

from acorns.derivatives import derive_bundle
from acorns.interp import HAVE_NATIVE, compile_exprs, evaluate
from acorns.verify import corpus_function, corpus_program, sample_points


def _best_of(repeat, fn):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if not HAVE_NATIVE:
        print("compiled backend not available; showing python timings only")

    cases = [("eq1", None), ("eq2", None), ("eq3", 5), ("eq3", 10),
             ("cross_entropy", None)]
    print(f"{'case':<16} {'ops':>6} {'python':>10} {'native':>10} {'speedup':>8}")
    for name, s in cases:
        fn = corpus_function(name, s=s)
        _, program, vars_ = corpus_program(fn)
        bundle = derive_bundle(program, vars_, want_hessian=False)
        labels = [slot.label for slot in program.inputs]
        tape = compile_exprs(list(bundle.grad), labels)
        rng = np.random.default_rng(0)
        pts = sample_points(fn, program, args.points, rng)

        t_py = _best_of(args.repeat, lambda: evaluate(tape, pts, backend="python"))
        label = f"{name}" + (f" s={s}" if s else "")
        if HAVE_NATIVE:
            t_nat = _best_of(args.repeat, lambda: evaluate(tape, pts, backend="native"))
            print(f"{label:<16} {tape.ops.shape[0]:>6} {t_py:>9.3f}s {t_nat:>9.3f}s "
                  f"{t_py / t_nat:>7.1f}x")
        else:
            print(f"{label:<16} {tape.ops.shape[0]:>6} {t_py:>9.3f}s {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
