"""Forward pricing: closed form, Crank-Nicolson solver, forward operator."""

import numpy as np
import pytest
from scipy.integrate import quad

from volcal import (
    Grid2D,
    InvalidArgumentError,
    MarketParams,
    SpotAxis,
    Surface,
    SurfaceFamily,
    bs_price,
    forward_operator,
    make_payoff,
    solve_dupire,
)
from conftest import axis_of, pde_grid, smooth_family

PAPER_GRID = Grid2D.from_steps(1.0, 0.01, 5.0, 0.1)


def price_surface(sigma=0.4, b=0.03, spot=30.0, grid=None):
    grid = PAPER_GRID if grid is None else grid
    params = MarketParams(b=b, spot=spot)
    return solve_dupire(Surface.constant(grid, sigma**2 / 2.0), params), params


class TestBsPrice:
    def test_expiry_returns_payoff(self):
        params = MarketParams(b=0.03, spot=30.0)
        assert bs_price(0.4, params, 25.0, 0.0) == 5.0
        assert bs_price(0.4, params, 35.0, 0.0) == 0.0

    def test_zero_strike_limit_is_spot(self):
        params = MarketParams(b=0.03, spot=30.0)
        value = bs_price(0.4, params, 1e-12, 1.0)
        assert abs(value - 30.0) < 1e-8, f"small-strike limit {value} != spot"

    def test_at_the_money_driftless_value(self):
        """sigma=0.4, b=0, S0=K=1, tau=1 collapses to 2*Phi(0.2) - 1."""
        params = MarketParams(b=0.0, spot=1.0)
        value = bs_price(0.4, params, 1.0, 1.0)
        assert abs(value - 0.158519) < 1e-6

    def test_matches_lognormal_quadrature(self):
        # E[(e^{sigma Z - sigma^2/2} - 1)^+] for Z standard normal
        sigma = 0.4
        params = MarketParams(b=0.0, spot=1.0)

        def integrand(z):
            return (
                (np.exp(sigma * z - 0.5 * sigma**2) - 1.0)
                * np.exp(-0.5 * z**2)
                / np.sqrt(2.0 * np.pi)
            )

        expected, _ = quad(integrand, 0.5 * sigma, 12.0)
        value = bs_price(sigma, params, 1.0, 1.0)
        assert abs(value - expected) < 1e-9, f"{value} vs quadrature {expected}"

    def test_array_strikes(self):
        params = MarketParams(b=0.03, spot=30.0)
        strikes = np.array([20.0, 30.0, 40.0])
        values = bs_price(0.4, params, strikes, 1.0)
        assert values.shape == (3,)
        assert np.all(np.diff(values) < 0.0), "call value must fall with strike"

    def test_input_validation(self):
        params = MarketParams(b=0.0, spot=1.0)
        with pytest.raises(InvalidArgumentError):
            bs_price(-0.1, params, 1.0, 1.0)
        with pytest.raises(InvalidArgumentError):
            bs_price(0.4, params, -1.0, 1.0)
        with pytest.raises(InvalidArgumentError):
            bs_price(0.4, params, 1.0, -0.5)
        with pytest.raises(InvalidArgumentError):
            MarketParams(b=0.03, spot=0.0)
        with pytest.raises(InvalidArgumentError):
            MarketParams(b=np.inf, spot=30.0)


class TestSolveDupire:
    def test_initial_row_is_exact_payoff(self):
        priced, params = price_surface()
        exact = make_payoff(PAPER_GRID, params.spot)
        assert np.array_equal(priced.values[0], exact.values[0])

    def test_boundary_columns(self):
        priced, params = price_surface()
        assert np.all(priced.values[1:, 0] == params.spot)
        assert np.all(priced.values[1:, -1] == 0.0)

    def test_matches_closed_form_at_the_money(self):
        priced, params = price_surface(sigma=0.4, b=0.03, spot=30.0)
        j = np.argmin(np.abs(PAPER_GRID.y_nodes))
        exact = bs_price(0.4, params, 30.0, 1.0)
        rel = abs(priced.values[-1, j] - exact) / exact
        assert rel <= 0.005, f"CN at the money off by {rel:.2%}"

    def test_monotone_decay_in_strike(self):
        grid = pde_grid(dtau=0.05, dy=0.1)
        fam = smooth_family(grid, axis_of(1), seed=4, amp=0.08, base=0.08)
        priced = solve_dupire(fam.slices[0], MarketParams(b=0.03, spot=30.0))
        rises = np.diff(priced.values[1:], axis=1)
        assert rises.max() <= 1e-10, f"price rose with strike by {rises.max():.2e}"

    def test_price_bounds(self):
        grid = pde_grid(dtau=0.05, dy=0.1)
        fam = smooth_family(grid, axis_of(1), seed=8, amp=0.08, base=0.1)
        priced = solve_dupire(fam.slices[0], MarketParams(b=0.03, spot=30.0))
        assert priced.values.min() >= -1e-10
        assert priced.values.max() <= 30.0 + 1e-10

    def test_nonpositive_variance_rejected(self):
        grid = pde_grid()
        values = np.full(grid.shape, 0.08)
        values[2, 3] = 0.0
        with pytest.raises(InvalidArgumentError):
            solve_dupire(Surface(grid, values), MarketParams(b=0.03, spot=30.0))


class TestForwardOperator:
    def test_prior_maps_to_zero_exactly(self):
        grid = pde_grid()
        axis = axis_of(3)
        prior = Surface.constant(grid, 0.16)
        fam = SurfaceFamily(axis, tuple([prior] * 3))
        out = forward_operator(fam, prior, axis, b=0.03)
        assert np.all(out.values3d == 0.0), "identical inputs must cancel bitwise"

    def test_single_slice_matches_direct_difference(self):
        grid = pde_grid()
        axis = SpotAxis.single(31.0)
        a = Surface.constant(grid, 0.12)
        prior = Surface.constant(grid, 0.08)
        out = forward_operator(SurfaceFamily(axis, (a,)), prior, axis, b=0.03)
        params = MarketParams(b=0.03, spot=31.0)
        direct = solve_dupire(a, params).values - solve_dupire(prior, params).values
        assert np.array_equal(out.slices[0].values, direct)

    def test_constant_slices_match_closed_form_differences(self):
        """Two constant-variance slices against the closed-form oracle."""
        axis = SpotAxis.from_range(29.0, 32.0, 2)
        prior = Surface.constant(PAPER_GRID, 0.4**2 / 2.0)
        fam = SurfaceFamily(
            axis,
            (
                Surface.constant(PAPER_GRID, 0.3**2 / 2.0),
                Surface.constant(PAPER_GRID, 0.5**2 / 2.0),
            ),
        )
        out = forward_operator(fam, prior, axis, b=0.03)
        band = np.abs(PAPER_GRID.y_nodes) <= 1.0 + 1e-12
        for i, sigma in enumerate((0.3, 0.5)):
            spot = float(axis.spots[i])
            params = MarketParams(b=0.03, spot=spot)
            strikes = spot * np.exp(PAPER_GRID.y_nodes[band])
            exact = bs_price(sigma, params, strikes, 1.0) - bs_price(
                0.4, params, strikes, 1.0
            )
            got = out.slices[i].values[-1, band]
            worst = np.abs(got - exact).max() / np.abs(exact).max()
            assert worst <= 0.01, f"slice {i}: closed-form mismatch {worst:.2%}"

    def test_threads_do_not_change_values(self):
        grid = pde_grid()
        axis = axis_of(4)
        fam = smooth_family(grid, axis, seed=3, amp=0.05, base=0.2)
        prior = Surface.constant(grid, 0.2)
        serial = forward_operator(fam, prior, axis, b=0.03, threads=1)
        pooled = forward_operator(fam, prior, axis, b=0.03, threads=4)
        assert np.array_equal(serial.values3d, pooled.values3d)

    def test_axis_mismatch_rejected(self):
        grid = pde_grid()
        fam = smooth_family(grid, axis_of(3), seed=1, amp=0.02, base=0.2)
        prior = Surface.constant(grid, 0.2)
        with pytest.raises(InvalidArgumentError):
            forward_operator(fam, prior, axis_of(4), b=0.03)
