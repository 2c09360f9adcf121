"""Discretization primitives: grids, surfaces, spot axes, surface families.

Everything here is immutable after construction and safe to share across
threads.  All L2 norms use the composite trapezoid rule on the tensor grid,
matching the second-order accuracy of the time stepper.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, InvalidArgumentError

#: relative tolerance for the uniform-spacing invariant
UNIFORM_RTOL = 1e-12


def _validated_axis(nodes, name, min_nodes=3):
    arr = np.asarray(nodes, dtype=float)
    if arr.ndim != 1 or arr.size < min_nodes:
        raise InvalidArgumentError(
            f"{name} needs at least {min_nodes} nodes, got shape {arr.shape}"
        )
    diffs = np.diff(arr)
    if arr.size > 1:
        if np.any(diffs <= 0.0):
            raise InvalidArgumentError(f"{name} must be strictly increasing")
        spread = diffs.max() - diffs.min()
        if spread > UNIFORM_RTOL * diffs.max():
            raise InvalidArgumentError(
                f"{name} must be uniformly spaced "
                f"(relative deviation {spread / diffs.max():.3e})"
            )
    out = arr.copy()
    out.setflags(write=False)
    return out


def _trapezoid_weights(nodes):
    """Composite trapezoid weights; a single node gets point mass 1."""
    n = nodes.size
    if n == 1:
        return np.ones(1)
    h = (nodes[-1] - nodes[0]) / (n - 1)
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Uniform tensor grid in time-to-maturity tau and log-moneyness y.

    tau_nodes runs from 0 to T; y_nodes covers a symmetric range [-Y, Y].
    """

    tau_nodes: np.ndarray
    y_nodes: np.ndarray

    def __post_init__(self):
        tau = _validated_axis(self.tau_nodes, "tau_nodes")
        y = _validated_axis(self.y_nodes, "y_nodes")
        if abs(tau[0]) > 1e-15:
            raise InvalidArgumentError("tau_nodes must start at 0")
        if abs(y[0] + y[-1]) > 1e-12 * max(abs(y[-1]), 1.0):
            raise InvalidArgumentError("y_nodes must span a symmetric range [-Y, Y]")
        object.__setattr__(self, "tau_nodes", tau)
        object.__setattr__(self, "y_nodes", y)

    @classmethod
    def from_steps(cls, t_max, dtau, y_max, dy):
        """Build a grid from target spacings (node counts are rounded)."""
        n_tau = int(round(t_max / dtau)) + 1
        n_y = int(round(2.0 * y_max / dy)) + 1
        return cls(np.linspace(0.0, t_max, n_tau), np.linspace(-y_max, y_max, n_y))

    @property
    def n_tau(self):
        return self.tau_nodes.size

    @property
    def n_y(self):
        return self.y_nodes.size

    @property
    def shape(self):
        return (self.n_tau, self.n_y)

    @property
    def dtau(self):
        return (self.tau_nodes[-1] - self.tau_nodes[0]) / (self.n_tau - 1)

    @property
    def dy(self):
        return (self.y_nodes[-1] - self.y_nodes[0]) / (self.n_y - 1)

    @cached_property
    def weight_matrix(self):
        """Trapezoid quadrature weights over (tau, y), shape ``self.shape``."""
        w = np.outer(_trapezoid_weights(self.tau_nodes), _trapezoid_weights(self.y_nodes))
        w.setflags(write=False)
        return w

    def same_as(self, other):
        return self is other or (
            np.array_equal(self.tau_nodes, other.tau_nodes)
            and np.array_equal(self.y_nodes, other.y_nodes)
        )

    def mesh(self):
        """(TAU, Y) coordinate arrays of shape ``self.shape``."""
        return np.meshgrid(self.tau_nodes, self.y_nodes, indexing="ij")


@dataclass(frozen=True, eq=False)
class Surface:
    """Real-valued field on a Grid2D (variance or price values)."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise InvalidArgumentError(
                f"values shape {vals.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise InvalidArgumentError("surface values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, grid, value):
        return cls(grid, np.full(grid.shape, float(value)))

    def with_values(self, values):
        return Surface(self.grid, values)

    def __add__(self, other):
        self._check(other)
        return Surface(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return Surface(self.grid, self.values - other.values)

    def __mul__(self, c):
        return Surface(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def _check(self, other):
        if not self.grid.same_as(other.grid):
            raise InvalidArgumentError("surface grids do not match")


@dataclass(frozen=True, eq=False)
class SpotAxis:
    """Shifted-spot axis: s = S - s_min with s_nodes in [0, s_max - s_min].

    A single-node axis (one price surface) is allowed as a degenerate case
    with point-mass quadrature weight 1.
    """

    s_min: float
    s_max: float
    s_nodes: np.ndarray

    def __post_init__(self):
        nodes = _validated_axis(self.s_nodes, "s_nodes", min_nodes=1)
        span = self.s_max - self.s_min
        if self.n_from(nodes) > 1 and span <= 0.0:
            raise InvalidArgumentError("s_max must exceed s_min")
        if abs(nodes[0]) > 1e-12 * max(abs(span), 1.0):
            raise InvalidArgumentError("s_nodes must start at 0")
        if abs(nodes[-1] - span) > 1e-9 * max(abs(span), 1.0):
            raise InvalidArgumentError("s_nodes must end at s_max - s_min")
        object.__setattr__(self, "s_min", float(self.s_min))
        object.__setattr__(self, "s_max", float(self.s_max))
        object.__setattr__(self, "s_nodes", nodes)

    @staticmethod
    def n_from(nodes):
        return nodes.size

    @classmethod
    def from_range(cls, s_min, s_max, n_slices):
        if n_slices == 1:
            if s_max != s_min:
                raise InvalidArgumentError("single-node axis requires s_max == s_min")
            return cls(s_min, s_max, np.zeros(1))
        return cls(s_min, s_max, np.linspace(0.0, s_max - s_min, n_slices))

    @classmethod
    def single(cls, spot):
        return cls(spot, spot, np.zeros(1))

    @property
    def n_slices(self):
        return self.s_nodes.size

    @property
    def span(self):
        return self.s_max - self.s_min

    @property
    def spots(self):
        """Absolute spot level per node."""
        return self.s_min + self.s_nodes

    @cached_property
    def weights(self):
        """Normalized trapezoid weights (they sum to 1).

        The family norm averages slice norms over the axis rather than
        integrating them, which makes norms comparable across axes of
        different spans and keeps the cosine-series Parseval identity free
        of span factors.
        """
        w = _trapezoid_weights(self.s_nodes)
        w /= w.sum()
        w.setflags(write=False)
        return w

    def subset(self, indices):
        """Axis restricted to the given strictly increasing node indices."""
        idx = np.asarray(indices, dtype=int)
        if idx.size < 1 or np.any(idx[1:] <= idx[:-1]):
            raise InvalidArgumentError("indices must be non-empty and strictly increasing")
        if idx[0] < 0 or idx[-1] >= self.n_slices:
            raise InvalidArgumentError(f"indices out of range for {self.n_slices} nodes")
        nodes = self.s_nodes[idx]
        return SpotAxis(
            self.s_min + nodes[0], self.s_min + nodes[-1], nodes - nodes[0]
        )

    def same_as(self, other):
        return self is other or (
            self.s_min == other.s_min
            and self.s_max == other.s_max
            and np.array_equal(self.s_nodes, other.s_nodes)
        )


@dataclass(frozen=True, eq=False)
class SurfaceFamily:
    """Ordered family of surfaces indexed by shifted spot, one per s-node."""

    axis: SpotAxis
    slices: tuple

    def __post_init__(self):
        slices = tuple(self.slices)
        if len(slices) != self.axis.n_slices:
            raise InvalidArgumentError(
                f"family has {len(slices)} slices but the axis has "
                f"{self.axis.n_slices} nodes"
            )
        grid = slices[0].grid
        for k, surf in enumerate(slices[1:], start=1):
            if not grid.same_as(surf.grid):
                raise InvalidArgumentError(f"slice {k} is on a different grid")
        object.__setattr__(self, "slices", slices)

    @classmethod
    def from_values(cls, axis, grid, values3d):
        arr = np.asarray(values3d, dtype=float)
        if arr.ndim != 3 or arr.shape[0] != axis.n_slices:
            raise InvalidArgumentError(
                f"values3d must have shape (n_slices, n_tau, n_y), got {arr.shape}"
            )
        return cls(axis, tuple(Surface(grid, arr[i]) for i in range(arr.shape[0])))

    @classmethod
    def constant(cls, axis, grid, value):
        return cls(axis, tuple(Surface.constant(grid, value) for _ in range(axis.n_slices)))

    @property
    def grid(self):
        return self.slices[0].grid

    @property
    def n_slices(self):
        return len(self.slices)

    @cached_property
    def values3d(self):
        arr = np.stack([s.values for s in self.slices])
        arr.setflags(write=False)
        return arr

    def subset(self, indices):
        return SurfaceFamily(
            self.axis.subset(indices), tuple(self.slices[i] for i in indices)
        )

    def __add__(self, other):
        self._check(other)
        return SurfaceFamily(self.axis, tuple(a + b for a, b in zip(self.slices, other.slices)))

    def __sub__(self, other):
        self._check(other)
        return SurfaceFamily(self.axis, tuple(a - b for a, b in zip(self.slices, other.slices)))

    def __mul__(self, c):
        return SurfaceFamily(self.axis, tuple(s * c for s in self.slices))

    __rmul__ = __mul__

    def _check(self, other):
        if not self.axis.same_as(other.axis):
            raise InvalidArgumentError("family spot axes do not match")
        if not self.grid.same_as(other.grid):
            raise InvalidArgumentError("family grids do not match")


def make_payoff(grid, spot):
    """Initial condition row: spot * max(1 - e^y, 0) at tau = 0, zeros above.

    Parameters
    ----------
    grid : Grid2D
    spot : float
        Underlying level S0; must be positive.
    """
    if not spot > 0.0:
        raise InvalidArgumentError(f"spot must be positive, got {spot}")
    values = np.zeros(grid.shape)
    values[0] = spot * np.maximum(1.0 - np.exp(grid.y_nodes), 0.0)
    return Surface(grid, values)


def interpolate_surface(src, dst_grid):
    """Bilinear interpolation of a surface onto another grid.

    The destination domain must be contained in the source domain (up to one
    source spacing); identical grids are copied bit-for-bit.
    """
    if src.grid.same_as(dst_grid):
        return Surface(dst_grid, src.values)
    s_tau, s_y = src.grid.tau_nodes, src.grid.y_nodes
    d_tau, d_y = dst_grid.tau_nodes, dst_grid.y_nodes
    tol_tau, tol_y = src.grid.dtau, src.grid.dy
    if d_tau[0] < s_tau[0] - tol_tau or d_tau[-1] > s_tau[-1] + tol_tau:
        raise DomainError(
            f"destination tau range [{d_tau[0]}, {d_tau[-1]}] exceeds "
            f"source range [{s_tau[0]}, {s_tau[-1]}]"
        )
    if d_y[0] < s_y[0] - tol_y or d_y[-1] > s_y[-1] + tol_y:
        raise DomainError(
            f"destination y range [{d_y[0]}, {d_y[-1]}] exceeds "
            f"source range [{s_y[0]}, {s_y[-1]}]"
        )
    from scipy.interpolate import RegularGridInterpolator

    interp = RegularGridInterpolator(
        (s_tau, s_y), src.values, method="linear", bounds_error=False, fill_value=None
    )
    tt = np.clip(d_tau, s_tau[0], s_tau[-1])
    yy = np.clip(d_y, s_y[0], s_y[-1])
    pts_t, pts_y = np.meshgrid(tt, yy, indexing="ij")
    values = interp(np.column_stack([pts_t.ravel(), pts_y.ravel()])).reshape(dst_grid.shape)
    return Surface(dst_grid, values)


def surface_l2_norm(surf):
    """Trapezoid-rule L2 norm of one surface over its (tau, y) domain."""
    return float(np.sqrt(np.sum(surf.grid.weight_matrix * surf.values**2)))


def surface_l2_inner(x, y):
    if not x.grid.same_as(y.grid):
        raise InvalidArgumentError("surface grids do not match")
    return float(np.sum(x.grid.weight_matrix * x.values * y.values))


def family_l2_norm(fam):
    """Family L2 norm: normalized trapezoid average over s of squared
    slice norms (see :attr:`SpotAxis.weights`)."""
    return float(np.sqrt(family_l2_inner(fam, fam)))


def family_l2_inner(x, y):
    """Inner product matching :func:`family_l2_norm`."""
    x._check(y)
    w_s = x.axis.weights
    w_d = x.grid.weight_matrix
    return float(np.einsum("s,sij,sij->", w_s, x.values3d * w_d, y.values3d))
