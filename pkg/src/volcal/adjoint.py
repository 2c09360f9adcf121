"""Adjoint solver and misfit gradient for the price-matching functional.

Sign conventions (fixed so that the finite-difference checks pass):
the forward operator's spatial part is A(u) = a*(u_yy - u_y) + b*u_y, whose
formal adjoint is A^T(v) = (a v)_yy + (a v)_y - b*v_y.  The adjoint field

    v_tau + (a v)_yy + (a v)_y - b v_y = -(u - u_obs),   v(T, .) = 0,
    v(., +-Y) = 0,

then makes g = 2 v (u_yy - u_y) the L2 representer of the misfit derivative.
Note the minus sign carried by the source and the minus on b*v_y: both are
forced by duality with the implemented forward solve.
"""

from __future__ import annotations

import numpy as np

from . import stepping
from .errors import InvalidArgumentError, NumericalError
from .grids import Surface, SurfaceFamily
from .pricing import (
    N_RANNACHER,
    MarketParams,
    _map_slices,
    _stepping_initial_row,
    prior_price_family,
    solve_dupire,
)


def solve_adjoint(a, u, u_obs, b):
    """Crank-Nicolson solve of the adjoint problem (see module docstring).

    Returns v on the shared grid, integrated backward from v(T) = 0 with
    homogeneous Dirichlet boundary columns.
    """
    grid = a.grid
    if not (grid.same_as(u.grid) and grid.same_as(u_obs.grid)):
        raise InvalidArgumentError("a, u, u_obs must share one grid")
    if np.any(a.values <= 0.0):
        raise InvalidArgumentError("variance surface must be strictly positive")
    src = -(u.values - u_obs.values)
    try:
        v = stepping.adjoint_pde_sweep(a.values, src, b, grid.dtau, grid.dy)
    except RuntimeError as exc:
        raise NumericalError(str(exc)) from exc
    if not np.all(np.isfinite(v)):
        raise NumericalError("adjoint solve produced non-finite values")
    return Surface(grid, v)


def misfit_gradient(fam_a, fam_obs, prior_a0, axis, b, threads=1, prior_prices=None):
    """L2 representer family of the derivative of the data misfit.

    For J(A) = ||forward_operator(A) - obs||^2 (family norm), returns g with
    <g, H>_family = dJ[H] for every direction H.  Per slice: forward solve,
    transposed recursion driven by the quadrature-weighted residual, then
    chain rule through the half-level variance average.  Dividing the raw
    gradient by the quadrature weights yields a staggered, second-order
    evaluation of 2 v (u_yy - u_y); assembling it in transpose form keeps the
    discrete pairing equal to the exact derivative of the discrete misfit.
    """
    if not fam_a.axis.same_as(axis):
        raise InvalidArgumentError("family axis does not match the given axis")
    grid = fam_a.grid
    if prior_prices is None:
        prior_prices = prior_price_family(prior_a0, axis, b, threads)
    weights = grid.weight_matrix

    def grad_one(i):
        params = MarketParams(b=b, spot=float(axis.spots[i]))
        try:
            u = solve_dupire(fam_a.slices[i], params)
            residual = (
                u.values - prior_prices.slices[i].values - fam_obs.slices[i].values
            )
            g_weighted = 2.0 * weights * residual
            lam = stepping.adjoint_sweep(
                fam_a.slices[i].values, g_weighted, b, grid.dtau, grid.dy, N_RANNACHER
            )
            # The sweep starts from the cell-averaged payoff, not the nodal
            # row stored in u, and the transpose is only exact against the
            # trajectory actually stepped.
            u_traj = u.values.copy()
            u_traj[0] = _stepping_initial_row(grid, params.spot)
            raw = stepping.gradient_assemble(u_traj, lam, grid.dtau, grid.dy, N_RANNACHER)
        except RuntimeError as exc:
            raise NumericalError(f"slice {i} (s={axis.s_nodes[i]:g}): {exc}") from exc
        return Surface(grid, raw / weights)

    return SurfaceFamily(axis, _map_slices(grad_one, axis.n_slices, threads))
