"""Reference time-stepping kernels (numpy + scipy.linalg.solve_banded).

All kernels work on plain 2D arrays of shape (n_tau, n_y) and share one
spatial discretization: centered second-order differences for the operator

    A(u)_j = a_j * (u_yy - u_y)_j + b * (u_y)_j

on the interior nodes j = 1..n_y-2, giving the tridiagonal stencil

    lo_j = a_j/dy^2 + (a_j - b)/(2 dy)      (couples u_{j-1})
    di_j = -2 a_j/dy^2
    up_j = a_j/dy^2 - (a_j - b)/(2 dy)      (couples u_{j+1})

Variance is evaluated at the half time level, abar = (a^n + a^{n+1})/2, and
the theta scheme uses theta=1 for the first ``n_rannacher`` steps (implicit
startup smoothing of the payoff kink) and theta=1/2 afterwards.

The transposed stencil (used by the adjoint sweeps) is the centered
discretization of (a v)_yy + (a v)_y - b v_y, i.e. the formal adjoint of A.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

BACKEND_NAME = "numpy"


def _stencil(abar_int, b, dy):
    """Tridiagonal coefficients of A on the interior nodes."""
    c2 = abar_int / dy**2
    c1 = (abar_int - b) / (2.0 * dy)
    return c2 + c1, -2.0 * c2, c2 - c1  # lo, di, up


def _theta(n, n_rannacher):
    return 1.0 if n < n_rannacher else 0.5


def _solve_tridiag(sub, diag, sup, rhs, step):
    """Solve a tridiagonal system given its row-indexed bands.

    sub[i] couples unknown i-1, sup[i] couples unknown i+1 (first/last
    entries unused respectively).
    """
    m = diag.size
    ab = np.zeros((3, m))
    ab[0, 1:] = sup[:-1]
    ab[1, :] = diag
    ab[2, :-1] = sub[1:]
    try:
        return solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"tridiagonal solve failed at time step {step}: {exc}") from exc


def _solve_transpose(lo, di, up, c, rhs, step):
    """Solve (I - c * A^T) x = rhs where A has row bands (lo, di, up).

    A^T's row bands are shifted copies of the opposite bands:
    (A^T)[i, i-1] = up[i-1] and (A^T)[i, i+1] = lo[i+1].
    """
    sub_t = np.zeros_like(up)
    sub_t[1:] = up[:-1]
    sup_t = np.zeros_like(lo)
    sup_t[:-1] = lo[1:]
    return _solve_tridiag(-c * sub_t, 1.0 - c * di, -c * sup_t, rhs, step)


def forward_sweep(a, u0, left_bc, right_bc, b, dtau, dy, n_rannacher=2):
    """Advance the pricing problem from the initial row u0.

    a : (n_tau, n_y) variance values; u0 : (n_y,) initial row.
    Returns the full (n_tau, n_y) solution with Dirichlet columns
    u[:,0] = left_bc and u[:,-1] = right_bc for every row after the first.
    """
    n_tau, n_y = a.shape
    u = np.empty((n_tau, n_y))
    u[0] = u0
    for n in range(n_tau - 1):
        theta = _theta(n, n_rannacher)
        abar = 0.5 * (a[n, 1:-1] + a[n + 1, 1:-1])
        lo, di, up = _stencil(abar, b, dy)
        un = u[n]
        # explicit part, full-vector stencil (boundary values included)
        au = lo * un[:-2] + di * un[1:-1] + up * un[2:]
        rhs = un[1:-1] + (1.0 - theta) * dtau * au
        # implicit boundary contributions move to the right-hand side
        rhs[0] += theta * dtau * lo[0] * left_bc
        rhs[-1] += theta * dtau * up[-1] * right_bc
        c = theta * dtau
        sol = _solve_tridiag(-c * lo, 1.0 - c * di, -c * up, rhs, n)
        u[n + 1, 0] = left_bc
        u[n + 1, 1:-1] = sol
        u[n + 1, -1] = right_bc
    return u


def adjoint_sweep(a, g, b, dtau, dy, n_rannacher=2):
    """Backward transpose recursion driven by the weighted residual g.

    Solves, for m = n_tau-1 .. 1 with lam[n_tau-1] handled first,

        (I - theta_{m-1} dtau A^T_{m-1}) lam^m
            = (I + (1-theta_m) dtau A^T_m) lam^{m+1} - g^m

    where A^T_n is the transpose of the interior stencil built from
    abar^n = (a^n + a^{n+1})/2.  lam has homogeneous Dirichlet columns and
    row 0 is unused (the initial price row is data, not an unknown).
    """
    n_tau, n_y = a.shape
    lam = np.zeros((n_tau, n_y))
    bands = [None] * (n_tau - 1)  # (lo, di, up) per step level
    for n in range(n_tau - 1):
        abar = 0.5 * (a[n, 1:-1] + a[n + 1, 1:-1])
        bands[n] = _stencil(abar, b, dy)

    def transpose_apply(level, v):
        lo, di, up = bands[level]
        out = di * v
        out[1:] += up[:-1] * v[:-1]
        out[:-1] += lo[1:] * v[1:]
        return out

    def transpose_solve(level, theta, rhs, step):
        lo, di, up = bands[level]
        return _solve_transpose(lo, di, up, theta * dtau, rhs, step)

    m_last = n_tau - 1
    lam[m_last, 1:-1] = transpose_solve(
        m_last - 1, _theta(m_last - 1, n_rannacher), -g[m_last, 1:-1], m_last
    )
    for m in range(n_tau - 2, 0, -1):
        rhs = (
            lam[m + 1, 1:-1]
            + (1.0 - _theta(m, n_rannacher)) * dtau * transpose_apply(m, lam[m + 1, 1:-1])
            - g[m, 1:-1]
        )
        lam[m, 1:-1] = transpose_solve(m - 1, _theta(m - 1, n_rannacher), rhs, m)
    return lam


def curvature_minus_slope(u_row, dy):
    """Centered (u_yy - u_y) on interior nodes of one row."""
    return (u_row[:-2] - 2.0 * u_row[1:-1] + u_row[2:]) / dy**2 - (
        u_row[2:] - u_row[:-2]
    ) / (2.0 * dy)


def gradient_assemble(u, lam, dtau, dy, n_rannacher=2):
    """Chain-rule assembly of dJ/da from the stored states and multipliers.

    Each step n contributes -dtau * lam^{n+1} * [theta_n D(u^{n+1}) +
    (1-theta_n) D(u^n)] to the half-level variance abar^n, which is then
    split evenly between the two adjacent time rows of a.
    Boundary columns never enter the interior stencil, so their gradient is 0.
    """
    n_tau, n_y = u.shape
    grad = np.zeros((n_tau, n_y))
    for n in range(n_tau - 1):
        theta = _theta(n, n_rannacher)
        d_next = curvature_minus_slope(u[n + 1], dy)
        d_cur = curvature_minus_slope(u[n], dy)
        t = -dtau * lam[n + 1, 1:-1] * (theta * d_next + (1.0 - theta) * d_cur)
        grad[n, 1:-1] += 0.5 * t
        grad[n + 1, 1:-1] += 0.5 * t
    return grad


def adjoint_pde_sweep(a, src, b, dtau, dy):
    """Crank-Nicolson solve of v_tau + (a v)_yy + (a v)_y - b v_y = src,
    backward from v(T) = 0 with homogeneous Dirichlet columns.
    """
    n_tau, n_y = a.shape
    v = np.zeros((n_tau, n_y))
    for m in range(n_tau - 2, -1, -1):
        abar = 0.5 * (a[m, 1:-1] + a[m + 1, 1:-1])
        lo, di, up = _stencil(abar, b, dy)
        vn = v[m + 1, 1:-1]
        atv = di * vn
        atv[1:] += up[:-1] * vn[:-1]
        atv[:-1] += lo[1:] * vn[1:]
        sbar = 0.5 * (src[m, 1:-1] + src[m + 1, 1:-1])
        rhs = vn + 0.5 * dtau * atv - dtau * sbar
        v[m, 1:-1] = _solve_transpose(lo, di, up, 0.5 * dtau, rhs, m)
    return v
