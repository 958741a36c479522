"""Wall-clock comparison of the compiled and numpy iteration kernels.

Usage::

    python benchmarks/bench_kernels.py [--n 30] [--t-max 500] [--repeat 20]

Both backends receive identical inputs; the script also checks that their
outputs agree bit for bit.
"""

import argparse
import time

import numpy as np

from adqsp import kernels
from adqsp.quantizer import QuantizerSchedule, cell_widths, dither_table
from adqsp.topology import generate_geometric_graph, incidence


def _inputs(n, t_max, seed):
    rng = np.random.default_rng(seed)
    inc = incidence(generate_geometric_graph(n, rng=rng))
    s = rng.normal(size=n)
    z0 = rng.normal(0.0, 1000.0, 2 * inc.m)
    sched = QuantizerSchedule(delta0=8000.0, gamma=0.97, delta_min=1e-3, bits=2)
    widths = cell_widths(sched, t_max)
    dith = dither_table(seed + 1, t_max, 2 * inc.m)
    plain = (s, inc.owner, inc.sign, inc.rev, inc.degrees, z0, 1.0, 0.0, t_max)
    adqsp = (s, inc.owner, inc.sign, inc.rev, inc.degrees, z0, 1.0, 0.0, widths,
             sched.half, dith)
    return plain, adqsp


def _time(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=30)
    ap.add_argument("--t-max", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    plain, adqsp = _inputs(args.n, args.t_max, args.seed)
    backends = kernels.available_backends()
    results = {}
    print(f"n={args.n} t_max={args.t_max} best of {args.repeat}")
    print(f"{'backend':<8} {'plain (ms)':>11} {'adqsp (ms)':>11}")
    for name, mod in backends.items():
        tp, op = _time(mod.plain_iterate, plain, args.repeat)
        ta, oa = _time(mod.adqsp_iterate, adqsp, args.repeat)
        results[name] = (tp, ta, op, oa)
        print(f"{name:<8} {tp * 1e3:>11.2f} {ta * 1e3:>11.2f}")
    if "cython" in results:
        py, cy = results["python"], results["cython"]
        same = all(np.array_equal(a, b) for a, b in zip(py[2] + py[3], cy[2] + cy[3]))
        print(f"speedup  {py[0] / cy[0]:>10.1f}x {py[1] / cy[1]:>10.1f}x")
        print(f"outputs identical: {same}")
    else:
        print("compiled backend not built; only the numpy kernels were timed")


if __name__ == "__main__":
    main()
