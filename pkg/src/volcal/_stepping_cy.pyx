# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled time-stepping kernels.

Same five kernels and the same discretization as the numpy reference
backend, with the tridiagonal systems solved in place by the Thomas
algorithm (the matrices are strictly diagonally dominant, so no pivoting
is needed) instead of round-tripping through LAPACK.
"""

import numpy as np

BACKEND_NAME = "cython"


cdef inline double _theta(Py_ssize_t n, int n_rannacher) noexcept nogil:
    return 1.0 if n < n_rannacher else 0.5


cdef int _thomas(double[::1] sub, double[::1] diag, double[::1] sup,
                 double[::1] rhs, double[::1] out,
                 double[::1] cp, double[::1] dp) noexcept nogil:
    """Solve the tridiagonal system; returns -1 on a zero pivot."""
    cdef Py_ssize_t m = diag.shape[0]
    cdef Py_ssize_t i
    cdef double denom = diag[0]
    if denom == 0.0:
        return -1
    cp[0] = sup[0] / denom
    dp[0] = rhs[0] / denom
    for i in range(1, m):
        denom = diag[i] - sub[i] * cp[i - 1]
        if denom == 0.0:
            return -1
        cp[i] = sup[i] / denom
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / denom
    out[m - 1] = dp[m - 1]
    for i in range(m - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]
    return 0


cdef void _bands(const double[:, ::1] a, Py_ssize_t level, double b, double dy,
                 double[::1] lo, double[::1] di, double[::1] up) noexcept nogil:
    """Interior stencil of A from the half-level variance at ``level``."""
    cdef Py_ssize_t mi = lo.shape[0]
    cdef Py_ssize_t j
    cdef double abar, c2, c1
    for j in range(mi):
        abar = 0.5 * (a[level, j + 1] + a[level + 1, j + 1])
        c2 = abar / (dy * dy)
        c1 = (abar - b) / (2.0 * dy)
        lo[j] = c2 + c1
        di[j] = -2.0 * c2
        up[j] = c2 - c1


cdef int _transpose_solve(double[::1] lo, double[::1] di, double[::1] up,
                          double c, double[::1] rhs, double[::1] out,
                          double[::1] sub, double[::1] dia, double[::1] sup,
                          double[::1] cp, double[::1] dp) noexcept nogil:
    """Solve (I - c A^T) out = rhs given A's row bands."""
    cdef Py_ssize_t mi = lo.shape[0]
    cdef Py_ssize_t j
    sub[0] = 0.0
    sup[mi - 1] = 0.0
    for j in range(1, mi):
        sub[j] = -c * up[j - 1]
    for j in range(mi - 1):
        sup[j] = -c * lo[j + 1]
    for j in range(mi):
        dia[j] = 1.0 - c * di[j]
    return _thomas(sub, dia, sup, rhs, out, cp, dp)


def forward_sweep(a, u0, double left_bc, double right_bc, double b,
                  double dtau, double dy, int n_rannacher=2):
    """Advance the pricing problem from the initial row u0 (see the
    numpy backend for the scheme)."""
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] u0v = np.ascontiguousarray(u0, dtype=np.float64)
    cdef Py_ssize_t n_tau = av.shape[0]
    cdef Py_ssize_t n_y = av.shape[1]
    cdef Py_ssize_t mi = n_y - 2

    u_arr = np.empty((n_tau, n_y))
    cdef double[:, ::1] u = u_arr
    work = np.empty((10, mi))
    cdef double[::1] lo = work[0], di = work[1], up = work[2]
    cdef double[::1] rhs = work[3], sol = work[4]
    cdef double[::1] sub = work[5], dia = work[6], sup = work[7]
    cdef double[::1] cp = work[8], dp = work[9]

    cdef Py_ssize_t n, j
    cdef double theta, c
    cdef int status = 0
    cdef Py_ssize_t fail_step = -1

    with nogil:
        for j in range(n_y):
            u[0, j] = u0v[j]
        for n in range(n_tau - 1):
            theta = _theta(n, n_rannacher)
            c = theta * dtau
            _bands(av, n, b, dy, lo, di, up)
            for j in range(mi):
                rhs[j] = u[n, j + 1] + (1.0 - theta) * dtau * (
                    lo[j] * u[n, j] + di[j] * u[n, j + 1] + up[j] * u[n, j + 2]
                )
            rhs[0] += c * lo[0] * left_bc
            rhs[mi - 1] += c * up[mi - 1] * right_bc
            for j in range(mi):
                sub[j] = -c * lo[j]
                dia[j] = 1.0 - c * di[j]
                sup[j] = -c * up[j]
            status = _thomas(sub, dia, sup, rhs, sol, cp, dp)
            if status != 0:
                fail_step = n
                break
            u[n + 1, 0] = left_bc
            for j in range(mi):
                u[n + 1, j + 1] = sol[j]
            u[n + 1, n_y - 1] = right_bc
    if status != 0:
        raise RuntimeError(f"tridiagonal solve failed at time step {fail_step}")
    return u_arr


def adjoint_sweep(a, g, double b, double dtau, double dy, int n_rannacher=2):
    """Backward transpose recursion driven by the weighted residual g
    (see the numpy backend for the recursion)."""
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t n_tau = av.shape[0]
    cdef Py_ssize_t n_y = av.shape[1]
    cdef Py_ssize_t mi = n_y - 2

    lam_arr = np.zeros((n_tau, n_y))
    cdef double[:, ::1] lam = lam_arr
    work = np.empty((10, mi))
    cdef double[::1] lo = work[0], di = work[1], up = work[2]
    cdef double[::1] rhs = work[3], sol = work[4]
    cdef double[::1] sub = work[5], dia = work[6], sup = work[7]
    cdef double[::1] cp = work[8], dp = work[9]

    cdef Py_ssize_t m, j
    cdef double theta_solve, atv
    cdef int status = 0
    cdef Py_ssize_t fail_step = -1
    cdef Py_ssize_t m_last = n_tau - 1

    with nogil:
        # final level: no explicit part, only the data term
        _bands(av, m_last - 1, b, dy, lo, di, up)
        for j in range(mi):
            rhs[j] = -gv[m_last, j + 1]
        status = _transpose_solve(
            lo, di, up, _theta(m_last - 1, n_rannacher) * dtau,
            rhs, sol, sub, dia, sup, cp, dp,
        )
        if status == 0:
            for j in range(mi):
                lam[m_last, j + 1] = sol[j]
            for m in range(n_tau - 2, 0, -1):
                _bands(av, m, b, dy, lo, di, up)
                for j in range(mi):
                    atv = di[j] * lam[m + 1, j + 1]
                    if j > 0:
                        atv += up[j - 1] * lam[m + 1, j]
                    if j < mi - 1:
                        atv += lo[j + 1] * lam[m + 1, j + 2]
                    rhs[j] = (
                        lam[m + 1, j + 1]
                        + (1.0 - _theta(m, n_rannacher)) * dtau * atv
                        - gv[m, j + 1]
                    )
                _bands(av, m - 1, b, dy, lo, di, up)
                status = _transpose_solve(
                    lo, di, up, _theta(m - 1, n_rannacher) * dtau,
                    rhs, sol, sub, dia, sup, cp, dp,
                )
                if status != 0:
                    fail_step = m
                    break
                for j in range(mi):
                    lam[m, j + 1] = sol[j]
        else:
            fail_step = m_last
    if status != 0:
        raise RuntimeError(f"tridiagonal solve failed at time step {fail_step}")
    return lam_arr


def curvature_minus_slope(u_row, double dy):
    """Centered (u_yy - u_y) on interior nodes of one row."""
    cdef const double[::1] uv = np.ascontiguousarray(u_row, dtype=np.float64)
    cdef Py_ssize_t mi = uv.shape[0] - 2
    out_arr = np.empty(mi)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t j
    with nogil:
        for j in range(mi):
            out[j] = (uv[j] - 2.0 * uv[j + 1] + uv[j + 2]) / (dy * dy) - (
                uv[j + 2] - uv[j]
            ) / (2.0 * dy)
    return out_arr


def gradient_assemble(u, lam, double dtau, double dy, int n_rannacher=2):
    """Chain-rule assembly of dJ/da from states and multipliers (see the
    numpy backend for the splitting)."""
    cdef const double[:, ::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[:, ::1] lamv = np.ascontiguousarray(lam, dtype=np.float64)
    cdef Py_ssize_t n_tau = uv.shape[0]
    cdef Py_ssize_t n_y = uv.shape[1]
    cdef Py_ssize_t mi = n_y - 2

    grad_arr = np.zeros((n_tau, n_y))
    cdef double[:, ::1] grad = grad_arr
    cdef Py_ssize_t n, j
    cdef double theta, d_next, d_cur, t, dy2
    dy2 = dy * dy
    with nogil:
        for n in range(n_tau - 1):
            theta = _theta(n, n_rannacher)
            for j in range(mi):
                d_next = (uv[n + 1, j] - 2.0 * uv[n + 1, j + 1] + uv[n + 1, j + 2]) / dy2 - (
                    uv[n + 1, j + 2] - uv[n + 1, j]
                ) / (2.0 * dy)
                d_cur = (uv[n, j] - 2.0 * uv[n, j + 1] + uv[n, j + 2]) / dy2 - (
                    uv[n, j + 2] - uv[n, j]
                ) / (2.0 * dy)
                t = -dtau * lamv[n + 1, j + 1] * (theta * d_next + (1.0 - theta) * d_cur)
                grad[n, j + 1] += 0.5 * t
                grad[n + 1, j + 1] += 0.5 * t
    return grad_arr


def adjoint_pde_sweep(a, src, double b, double dtau, double dy):
    """Crank-Nicolson solve of v_tau + (a v)_yy + (a v)_y - b v_y = src,
    backward from v(T) = 0 with homogeneous Dirichlet columns."""
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] sv = np.ascontiguousarray(src, dtype=np.float64)
    cdef Py_ssize_t n_tau = av.shape[0]
    cdef Py_ssize_t n_y = av.shape[1]
    cdef Py_ssize_t mi = n_y - 2

    v_arr = np.zeros((n_tau, n_y))
    cdef double[:, ::1] v = v_arr
    work = np.empty((10, mi))
    cdef double[::1] lo = work[0], di = work[1], up = work[2]
    cdef double[::1] rhs = work[3], sol = work[4]
    cdef double[::1] sub = work[5], dia = work[6], sup = work[7]
    cdef double[::1] cp = work[8], dp = work[9]

    cdef Py_ssize_t m, j
    cdef double atv, sbar
    cdef int status = 0
    cdef Py_ssize_t fail_step = -1

    with nogil:
        for m in range(n_tau - 2, -1, -1):
            _bands(av, m, b, dy, lo, di, up)
            for j in range(mi):
                atv = di[j] * v[m + 1, j + 1]
                if j > 0:
                    atv += up[j - 1] * v[m + 1, j]
                if j < mi - 1:
                    atv += lo[j + 1] * v[m + 1, j + 2]
                sbar = 0.5 * (sv[m, j + 1] + sv[m + 1, j + 1])
                rhs[j] = v[m + 1, j + 1] + 0.5 * dtau * atv - dtau * sbar
            status = _transpose_solve(
                lo, di, up, 0.5 * dtau, rhs, sol, sub, dia, sup, cp, dp
            )
            if status != 0:
                fail_step = m
                break
            for j in range(mi):
                v[m, j + 1] = sol[j]
    if status != 0:
        raise RuntimeError(f"tridiagonal solve failed at time step {fail_step}")
    return v_arr
