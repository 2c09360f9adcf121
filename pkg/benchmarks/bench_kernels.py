"""Benchmark the compiled stepping kernels against the numpy reference.

Times the four hot kernels on a ladder of grid sizes and reports the
speedup of the compiled backend together with the worst elementwise
deviation between the two implementations on identical inputs.  An
optional end-to-end timing runs the family forward solve in a fresh
interpreter per backend (the backend is fixed at import time).

Usage:
    python benchmarks/bench_kernels.py [--repeats N] [--end-to-end]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from volcal import _stepping_py

try:
    from volcal import _stepping_cy
except ImportError:
    _stepping_cy = None

GRIDS = [
    ("desk coarse", 51, 101),
    ("paper coarse", 101, 101),
    ("paper fine", 501, 1001),
]

CARRY = 0.03


def build_inputs(n_tau, n_y, seed=0):
    rng = np.random.default_rng(seed)
    dtau = 1.0 / (n_tau - 1)
    dy = 10.0 / (n_y - 1)
    y = np.linspace(-5.0, 5.0, n_y)
    a = 0.4 + 0.05 * rng.standard_normal((n_tau, n_y))
    u0 = np.maximum(1.0 - np.exp(y), 0.0)
    g = rng.standard_normal((n_tau, n_y))
    g[:, 0] = g[:, -1] = 0.0
    return {"a": a, "u0": u0, "g": g, "dtau": dtau, "dy": dy}


def kernel_calls(mod, inp):
    """The four hot kernels with realistic arguments, as name -> thunk."""
    a, u0, g = inp["a"], inp["u0"], inp["g"]
    dtau, dy = inp["dtau"], inp["dy"]
    u = mod.forward_sweep(a, u0, 1.0, 0.0, CARRY, dtau, dy)
    lam = mod.adjoint_sweep(a, g, CARRY, dtau, dy)
    return {
        "forward_sweep": lambda: mod.forward_sweep(a, u0, 1.0, 0.0, CARRY, dtau, dy),
        "adjoint_sweep": lambda: mod.adjoint_sweep(a, g, CARRY, dtau, dy),
        "gradient_assemble": lambda: mod.gradient_assemble(u, lam, dtau, dy),
        "adjoint_pde_sweep": lambda: mod.adjoint_pde_sweep(a, g, CARRY, dtau, dy),
    }


def best_time(thunk, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        thunk()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_grid(label, n_tau, n_y, repeats):
    inp = build_inputs(n_tau, n_y)
    ref_calls = kernel_calls(_stepping_py, inp)
    cy_calls = kernel_calls(_stepping_cy, inp) if _stepping_cy else None
    print(f"\n{label}: {n_tau} x {n_y} nodes")
    header = f"  {'kernel':<20} {'numpy':>10} {'cython':>10} {'speedup':>8} {'max|diff|':>10}"
    print(header)
    for name, thunk in ref_calls.items():
        t_py = best_time(thunk, repeats)
        if cy_calls is None:
            print(f"  {name:<20} {t_py * 1e3:>8.2f}ms {'n/a':>10} {'n/a':>8} {'n/a':>10}")
            continue
        t_cy = best_time(cy_calls[name], repeats)
        diff = float(np.max(np.abs(thunk() - cy_calls[name]())))
        print(
            f"  {name:<20} {t_py * 1e3:>8.2f}ms {t_cy * 1e3:>8.2f}ms"
            f" {t_py / t_cy:>7.1f}x {diff:>10.2e}"
        )


END_TO_END = """
import time
import numpy as np
from volcal import Grid2D, SpotAxis, Surface, SurfaceFamily, forward_operator
from volcal.stepping import backend_name

grid = Grid2D.from_steps(1.0, 0.01, 5.0, 0.1)
axis = SpotAxis.from_range(29.5, 32.5, 7)
tau, y = grid.mesh()
fam = SurfaceFamily(axis, tuple(
    Surface(grid, 0.16 + 0.02 * np.cos(np.pi * y / 5.0) * (1 + 0.1 * s))
    for s in axis.s_nodes))
prior = Surface.constant(grid, 0.4)
forward_operator(fam, prior, axis, 0.03, 1)  # warm-up
t0 = time.perf_counter()
for _ in range(3):
    forward_operator(fam, prior, axis, 0.03, 1)
print(f"  {backend_name():<8} 7-slice forward_operator: "
      f"{(time.perf_counter() - t0) / 3 * 1e3:.1f}ms")
"""


def bench_end_to_end():
    print("\nend to end (fresh interpreter per backend):", flush=True)
    for backend in ("numpy", "cython"):
        if backend == "cython" and _stepping_cy is None:
            print("  cython   not built")
            continue
        subprocess.run(
            [sys.executable, "-c", END_TO_END],
            env={**os.environ, "VOLCAL_BACKEND": backend},
            check=True,
        )


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5, help="timing repeats (best-of)")
    parser.add_argument("--end-to-end", action="store_true", help="also time a family forward solve per backend")
    args = parser.parse_args(argv)

    if _stepping_cy is None:
        print("compiled backend not built; timing the numpy reference only")
    for label, n_tau, n_y in GRIDS:
        bench_grid(label, n_tau, n_y, args.repeats)
    if args.end_to_end:
        bench_end_to_end()
    return 0


if __name__ == "__main__":
    sys.exit(main())
