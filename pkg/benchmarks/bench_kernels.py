"""Compare the compiled stencil kernels with the numpy fallback.

Run with ``python benchmarks/bench_kernels.py``; prints the median time per
call for each kernel and grid, and the speed-up of the compiled backend.
A 100-step run on n=128 is timed end to end under both backends.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from wpflow import kernels

GRIDS = [(128, 1), (1024, 1), (64, 64), (256, 256)]


def _calls(mod, w, ihx2, ihy2):
    return {
        "laplacian": lambda: mod.laplacian(w, ihx2, ihy2),
        "chemical_potential": lambda: mod.chemical_potential(w, ihx2, ihy2, 1.0),
        "area_sum": lambda: mod.area_sum(w, ihx2, ihy2, 1.0),
        "energy_grad": lambda: mod.energy_grad(w, ihx2, ihy2, 1.0),
    }


def median_time(fn, repeat):
    number = max(1, int(0.02 / max(timeit.timeit(fn, number=1), 1e-7)))
    times = timeit.repeat(fn, number=number, repeat=repeat)
    return float(np.median(times)) / number


RUN_SNIPPET = """
import time
from wpflow import (BACKEND, ConstraintSpec, Grid, PotentialParams, RunConfig,
                    construct_feasible, evolve)
g = Grid.line(1.0, 128)
spec = ConstraintSpec(0.0, 0.5)
p = PotentialParams(1.0)
v0 = construct_feasible(spec, g.cosine_mode((1,)), p, g)
t = time.perf_counter()
evolve(v0, RunConfig(spec, p, g, tau=1e-3, t_end=0.1))
print(BACKEND, time.perf_counter() - t)
"""


def end_to_end():
    out = {}
    for force in ("0", "1"):
        env = dict(os.environ, WPF_PURE_PYTHON=force)
        res = subprocess.run([sys.executable, "-c", RUN_SNIPPET], env=env, check=True,
                             capture_output=True, text=True)
        name, seconds = res.stdout.split()
        out[name] = float(seconds)
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=7)
    args = parser.parse_args(argv)
    if kernels.compiled is None:
        print("compiled extension not built; only the fallback is available")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'grid':>10} {'kernel':<20} {'compiled':>12} {'python':>12} {'speed-up':>9}")
    for nx, ny in GRIDS:
        w = rng.normal(size=(nx, ny))
        ihx2 = float(nx * nx)
        ihy2 = 0.0 if ny == 1 else float(ny * ny)
        fast = _calls(kernels.compiled, w, ihx2, ihy2)
        slow = _calls(kernels.pure, w, ihx2, ihy2)
        for name in fast:
            tc = median_time(fast[name], args.repeat)
            tp = median_time(slow[name], args.repeat)
            label = f"{nx}" if ny == 1 else f"{nx}x{ny}"
            print(f"{label:>10} {name:<20} {tc * 1e6:10.2f}us {tp * 1e6:10.2f}us {tp / tc:8.1f}x")
    runs = end_to_end()
    print(f"100-step run, n=128: compiled {runs['compiled']:.3f}s, "
          f"python {runs['python']:.3f}s ({runs['python'] / runs['compiled']:.1f}x)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
