"""Compare the compiled and numpy kernel backends on batched workloads.

Run with ``python benchmarks/bench_kernels.py [--points N] [--repeat R]``.
Prints best-of-R wall time per kernel and backend, the speed-up, and the
largest difference between the two backends' results.
"""

import argparse
import time

import numpy as np

from finvisc import kernels
from finvisc.material import vhb4910
from finvisc.tensors import mat_to_sym, random_deformation, random_unimodular_spd


def states(n, seed=0):
    rng = np.random.default_rng(seed)
    F = np.array([random_deformation(rng, 0.3) for _ in range(n)])
    Dv = np.array([mat_to_sym(random_unimodular_spd(rng, 0.2)) for _ in range(n)])
    return F, Dv


def cases(n):
    p = vhb4910(146200.0).as_array()
    F, Dv = states(n)
    F1 = F @ (np.eye(3) + 0.01 * np.diag([1.0, -0.5, -0.5]))
    q = np.zeros(n)
    lam = np.linspace(1.0, 1.5, n)
    stages = np.stack([lam * (1.0 + 0.001 * k) for k in range(5)], axis=1)
    return {
        "flow_rate": lambda: kernels.flow_rate(F, Dv, p),
        "time_scale": lambda: kernels.time_scale(F, Dv, p),
        "stress_tangent": lambda: kernels.stress_tangent(F, Dv, q, p, True),
        "stress_only": lambda: kernels.stress_tangent(F, Dv, q, p, False),
        "rk5_march(nsub=4)": lambda: kernels.rk5_march(F, F1, Dv, 0.01, p, 4),
        "rk5_scalar": lambda: kernels.rk5_scalar(stages, np.ones(n), 0.01, p),
    }


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _maxdiff(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return max(float(np.max(np.abs(np.asarray(x, float) - np.asarray(y, float))))
               for x, y in zip(a, b) if x is not None)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    names = [b for b in ("python", "compiled") if b in kernels.BACKENDS]
    print(f"{args.points} points, best of {args.repeat}; backends: {', '.join(names)}")
    print(f"{'kernel':<20}" + "".join(f"{n + ' [ms]':>16}" for n in names)
          + f"{'speed-up':>10}{'max diff':>12}")
    timings = {}
    for name in cases(1):
        row, outs = [], []
        for b in names:
            with kernels.backend(b):
                fn = cases(args.points)[name]
                t, out = _best(fn, args.repeat)
            row.append(t)
            outs.append(out)
        timings[name] = row
        speed = f"{row[0] / row[1]:10.1f}" if len(row) == 2 else f"{'-':>10}"
        diff = f"{_maxdiff(*outs):12.2e}" if len(outs) == 2 else f"{'-':>12}"
        print(f"{name:<20}" + "".join(f"{1e3 * t:16.2f}" for t in row) + speed + diff)
    return timings


if __name__ == "__main__":
    main()
