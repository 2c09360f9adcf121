"""Shared builders for the test suite.

The helpers here construct small grids, axes, and families sized for
unit tests; anything resolution-sensitive builds its own geometry
locally.  The acceptance tests additionally register one verdict line
per criterion, printed in the terminal summary so a full run ends with
a readable scorecard.
"""

import numpy as np

from volcal import Grid2D, SpotAxis, Surface, SurfaceFamily


def tiny_grid(n_tau=6, n_y=9, t_max=1.0, y_max=2.0):
    """Small grid for algebra-level tests (no PDE accuracy expected)."""
    return Grid2D(np.linspace(0.0, t_max, n_tau), np.linspace(-y_max, y_max, n_y))


def pde_grid(dtau=0.1, dy=0.2, t_max=1.0, y_max=2.0):
    """Grid small enough for fast solves but fine enough to be parabolic."""
    return Grid2D.from_steps(t_max, dtau, y_max, dy)


def axis_of(n, lo=29.5, hi=32.5):
    if n == 1:
        return SpotAxis.single(0.5 * (lo + hi))
    return SpotAxis.from_range(lo, hi, n)


def random_family(grid, axis, seed=0, scale=1.0, offset=0.0):
    """Seeded random family; offset shifts values (e.g. into a variance box)."""
    rng = np.random.default_rng(seed)
    values = offset + scale * rng.standard_normal((axis.n_slices,) + grid.shape)
    return SurfaceFamily.from_values(axis, grid, values)


def smooth_family(grid, axis, seed=0, amp=0.05, base=0.4):
    """Strictly positive family built from a few smooth bumps per slice."""
    rng = np.random.default_rng(seed)
    tau, y = grid.mesh()
    slices = []
    for _ in range(axis.n_slices):
        c1, c2 = rng.uniform(-1.0, 1.0, size=2)
        field = base + amp * (
            c1 * np.exp(-(y**2)) + c2 * np.sin(np.pi * tau) * np.exp(-((y - 0.5) ** 2))
        )
        slices.append(Surface(grid, field))
    return SurfaceFamily(axis, tuple(slices))


CRITERION_LINES = []


def record_criterion(number, label, passed, detail=""):
    """Collect one scorecard line; the terminal summary prints them all."""
    status = "PASS" if passed else "FAIL"
    suffix = f" ({detail})" if detail else ""
    CRITERION_LINES.append(f"criterion {number:2d} [{status}] {label}{suffix}")
    return passed


def pytest_terminal_summary(terminalreporter):
    if not CRITERION_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in sorted(CRITERION_LINES):
        terminalreporter.write_line(line)
