"""Dense operator assembly: compiled kernel against the NumPy fallback.

    python benchmarks/bench_assembly.py [--sizes 250 500 1000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from fhj.core import DomainGeometry
from fhj.kernels import unit_kernel
from fhj.solver import _assemble_py
from fhj.solver.discretize import Knots, assemble_kernel

try:
    from fhj.solver._assemble import far_field as compiled
except ImportError:
    compiled = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[250, 500, 1000])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--s", type=float, default=0.75)
    args = ap.parse_args()
    K = unit_kernel(args.s)
    print(f"{'n':>6} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8} {'max |diff|':>11}")
    for n in args.sizes:
        dom = DomainGeometry.interval(n=n, grading=1.0 + 40.0 / n, d_min=1e-6)
        knots = Knots.of(dom)
        tp, rp = best_of(lambda: assemble_kernel(K, knots, far_field=_assemble_py.far_field), args.repeat)
        if compiled is None:
            print(f"{n:6d} {tp:11.3f} {'-':>11} {'-':>8} {'-':>11}")
            continue
        tc, rc = best_of(lambda: assemble_kernel(K, knots, far_field=compiled), args.repeat)
        scale = np.abs(rp.A).max()
        diff = np.abs(rp.A - rc.A).max() / scale
        print(f"{n:6d} {tp:11.3f} {tc:11.3f} {tp / tc:8.1f} {diff:11.2e}")


if __name__ == "__main__":
    main()
