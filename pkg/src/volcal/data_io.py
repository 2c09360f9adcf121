"""Synthetic data generation, market quote ingestion, and serialization.

Synthetic data follow the inverse-crime discipline: truth is priced on a
strictly finer grid than the inversion sees, zero-mean Gaussian noise is
added to the fine prices, and only then is everything interpolated down
to the calibration grid.  The noise level handed to the selection rules
is the realized family norm of the interpolated noise, since those rules
compare residuals in exactly that norm.

Market quotes arrive as CSV rows (one surface per quote date), are
converted to mid prices in (tau, log-moneyness) coordinates, interpolated
onto the calibration grid, and shifted into the forward operator's
price-difference convention by subtracting the prior's prices.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, InvalidArgumentError
from .grids import (
    Grid2D,
    SpotAxis,
    Surface,
    SurfaceFamily,
    family_l2_norm,
    interpolate_surface,
)
from .morozov import NoisyData
from .pricing import MarketParams, solve_dupire

logger = logging.getLogger(__name__)

#: CSV header contract for quote files
QUOTE_COLUMNS = ("quote_date", "maturity_years", "strike", "bid", "ask", "underlying")


def synth_truth_surface(s, tau, y):
    """Benchmark local-variance surface indexed by shifted spot.

    Inside (tau, y) in (0, 1] x [-2/5, 2/5] the value is
    (2/5)(1 - (2/5)e^{-(tau-s)/2}) cos(1.25*pi*y), and 2/5 elsewhere.
    The formula dips to zero at y = +-2/5 and goes negative for larger s,
    so callers clamp the result into their admissible box before use.
    """
    u = np.asarray(tau, dtype=float)
    x = np.asarray(y, dtype=float)
    base = 0.4 * (1.0 - 0.4 * np.exp(-(u - s) / 2.0)) * np.cos(1.25 * np.pi * x)
    inside = (u > 0.0) & (u <= 1.0) & (np.abs(x) <= 0.4)
    out = np.where(inside, base, 0.4)
    if np.isscalar(tau) and np.isscalar(y):
        return float(out)
    return out


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic data set.

    truth is either a callable (s, tau_mesh, y_mesh) -> variance array or
    a SurfaceFamily already sampled on the fine grid; it must be strictly
    positive wherever used (clamp before constructing the spec).
    """

    truth: object
    fine_grid: Grid2D
    coarse_grid: Grid2D
    axis: SpotAxis
    noise_std: float
    b: float = 0.03
    seed: int = 0
    prior_a0: float = 0.4

    def __post_init__(self):
        fine, coarse = self.fine_grid, self.coarse_grid
        if (
            fine.dtau > coarse.dtau
            or fine.dy > coarse.dy
            or (fine.dtau == coarse.dtau and fine.dy == coarse.dy)
        ):
            raise InvalidArgumentError(
                "fine grid must be at least as fine as the coarse grid "
                "everywhere and strictly finer somewhere "
                f"(dtau {fine.dtau} vs {coarse.dtau}, "
                f"dy {fine.dy} vs {coarse.dy})"
            )
        if self.noise_std < 0.0:
            raise InvalidArgumentError(
                f"noise_std must be >= 0, got {self.noise_std}"
            )
        if not self.prior_a0 > 0.0:
            raise InvalidArgumentError(
                f"prior_a0 must be positive, got {self.prior_a0}"
            )
        if isinstance(self.truth, SurfaceFamily):
            if not self.truth.grid.same_as(fine):
                raise InvalidArgumentError(
                    "sampled truth must live on the fine grid"
                )
            if not self.truth.axis.same_as(self.axis):
                raise InvalidArgumentError("truth axis does not match the spec axis")
        elif not callable(self.truth):
            raise InvalidArgumentError(
                "truth must be a callable or a SurfaceFamily"
            )


def _truth_slice(spec, i, grid):
    if isinstance(spec.truth, SurfaceFamily):
        if grid.same_as(spec.fine_grid):
            return spec.truth.slices[i]
        return interpolate_surface(spec.truth.slices[i], grid)
    tau, y = grid.mesh()
    return Surface(grid, np.asarray(spec.truth(spec.axis.s_nodes[i], tau, y), float))


def generate_synthetic(spec):
    """Noisy coarse-grid data plus noiseless references.

    Returns (data, truth_on_coarse, noiseless_obs): the NoisyData carries
    the coarse noisy price-difference family with delta set to the
    realized family norm of the interpolated noise; truth_on_coarse and
    noiseless_obs support reconstruction-error and rate diagnostics.
    Fixed seeds give bitwise-identical outputs.
    """
    axis = spec.axis
    fine, coarse = spec.fine_grid, spec.coarse_grid
    prior_fine = Surface.constant(fine, spec.prior_a0)
    rng = np.random.default_rng(spec.seed)

    noisy_slices, clean_slices, truth_slices = [], [], []
    for i in range(axis.n_slices):
        params = MarketParams(b=spec.b, spot=float(axis.spots[i]))
        u_truth = solve_dupire(_truth_slice(spec, i, fine), params)
        u_prior = solve_dupire(prior_fine, params)
        clean_fine = Surface(fine, u_truth.values - u_prior.values)
        noise = spec.noise_std * rng.standard_normal(fine.shape)
        noisy_fine = Surface(fine, clean_fine.values + noise)
        noisy_slices.append(interpolate_surface(noisy_fine, coarse))
        clean_slices.append(interpolate_surface(clean_fine, coarse))
        truth_slices.append(_truth_slice(spec, i, coarse))

    obs = SurfaceFamily(axis, tuple(noisy_slices))
    noiseless_obs = SurfaceFamily(axis, tuple(clean_slices))
    truth_on_coarse = SurfaceFamily(axis, tuple(truth_slices))
    delta = family_l2_norm(obs - noiseless_obs)
    return NoisyData(obs, delta), truth_on_coarse, noiseless_obs


@dataclass(frozen=True)
class MarketQuote:
    """One listed call quote."""

    maturity: float
    strike: float
    bid: float
    ask: float
    underlying: float
    quote_date: str

    def __post_init__(self):
        if not self.maturity > 0.0:
            raise InvalidArgumentError(f"maturity must be positive, got {self.maturity}")
        if not self.strike > 0.0:
            raise InvalidArgumentError(f"strike must be positive, got {self.strike}")
        if not 0.0 <= self.bid <= self.ask:
            raise InvalidArgumentError(
                f"need 0 <= bid <= ask, got bid={self.bid} ask={self.ask}"
            )
        if not self.underlying > 0.0:
            raise InvalidArgumentError(
                f"underlying must be positive, got {self.underlying}"
            )


def load_market_quotes(path):
    """Parse a quote CSV; column order and names are part of the contract."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != QUOTE_COLUMNS:
            raise DataFormatError(
                f"{path}: header must be {','.join(QUOTE_COLUMNS)}, "
                f"got {','.join(header)}"
            )
        quotes, crossed = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(QUOTE_COLUMNS):
                raise DataFormatError(
                    f"{path}:{line_no}: expected {len(QUOTE_COLUMNS)} columns, "
                    f"got {len(row)}"
                )
            try:
                date = row[0].strip()
                maturity, strike, bid, ask, underlying = map(float, row[1:])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{line_no}: {exc}") from None
            if bid > ask:
                crossed.append(f"line {line_no} (bid={bid} > ask={ask})")
                continue
            try:
                quotes.append(
                    MarketQuote(
                        maturity=maturity,
                        strike=strike,
                        bid=bid,
                        ask=ask,
                        underlying=underlying,
                        quote_date=date,
                    )
                )
            except InvalidArgumentError as exc:
                raise DataFormatError(f"{path}:{line_no}: {exc}") from None
    if crossed:
        raise DataFormatError(f"{path}: crossed quotes at {'; '.join(crossed)}")
    return quotes


def half_mean_spread(quotes):
    """Noise-level proxy: half the mean bid-ask spread."""
    if not quotes:
        raise InvalidArgumentError("no quotes given")
    return 0.5 * float(np.mean([q.ask - q.bid for q in quotes]))


def _interp_scattered(points, values, grid):
    """Linear interpolation of scattered (tau, y) points with
    nearest-value extension outside their hull (and for degenerate
    point sets that admit no triangulation)."""
    from scipy.interpolate import griddata
    from scipy.spatial import QhullError

    tau, y = grid.mesh()
    targets = np.column_stack([tau.ravel(), y.ravel()])
    pts = np.asarray(points, dtype=float)
    vals = np.asarray(values, dtype=float)
    out = np.full(len(targets), np.nan)
    if len(pts) >= 3:
        try:
            out = griddata(pts, vals, targets, method="linear")
        except QhullError:
            pass
    missing = np.isnan(out)
    if missing.any():
        out[missing] = griddata(pts, vals, targets[missing], method="nearest")
    return out.reshape(grid.shape)


def _check_strike_monotone(slice_values, grid, y_lo, y_hi, tol, label):
    """Call mids should not increase with strike; log (not fail) breaches.

    Only the quoted log-moneyness range is checked; outside it the
    surface is a nearest-value extension, not market information.
    """
    cols = (grid.y_nodes >= y_lo) & (grid.y_nodes <= y_hi)
    if cols.sum() < 2:
        return
    increases = np.diff(slice_values[:, cols], axis=1)
    worst = float(increases.max(initial=0.0))
    if worst > tol:
        count = int(np.sum(increases > tol))
        logger.warning(
            "%s: %d interpolated mid prices increase with strike "
            "(worst rise %.3g, tolerance %.3g)",
            label,
            count,
            worst,
            tol,
        )


def quotes_to_family(quotes, grid, axis, b, prior_a0=0.4):
    """Quote list -> NoisyData in the operator's difference convention.

    Quotes are grouped into one surface per quote date and the groups are
    ordered by their mean underlying level, ascending; the given axis
    must provide exactly one node per date (it is the caller's uniform
    model of the observed spot levels).  Mid prices are interpolated onto
    the grid in (tau, log-moneyness), the prior's prices at each group's
    own underlying are subtracted, and the tau=0 row is pinned to zero
    since the difference of payoffs vanishes identically.  The noise
    level is half the mean spread scaled by the family norm of the
    constant-one family.
    """
    if not quotes:
        raise DataFormatError("no quotes to build a family from")
    groups = {}
    for quote in quotes:
        groups.setdefault(quote.quote_date, []).append(quote)
    ordered = sorted(
        groups.items(), key=lambda kv: float(np.mean([q.underlying for q in kv[1]]))
    )
    if len(ordered) != axis.n_slices:
        raise DataFormatError(
            f"{len(ordered)} quote dates but the axis has {axis.n_slices} nodes"
        )

    spread_tol = half_mean_spread(quotes)
    prior = Surface.constant(grid, prior_a0)
    slices = []
    for (date, group), spot_node in zip(ordered, axis.spots):
        s0 = float(np.mean([q.underlying for q in group]))
        points = [(q.maturity, math.log(q.strike / s0)) for q in group]
        mids = [0.5 * (q.bid + q.ask) for q in group]
        mid_surface = _interp_scattered(points, mids, grid)
        y_quoted = [p[1] for p in points]
        _check_strike_monotone(
            mid_surface,
            grid,
            min(y_quoted),
            max(y_quoted),
            spread_tol,
            f"quote date {date}",
        )
        u_prior = solve_dupire(prior, MarketParams(b=b, spot=s0))
        values = mid_surface - u_prior.values
        values[0] = 0.0
        slices.append(Surface(grid, values))

    obs = SurfaceFamily(axis, tuple(slices))
    ones = SurfaceFamily.constant(axis, grid, 1.0)
    delta = half_mean_spread(quotes) * family_l2_norm(ones)
    return NoisyData(obs, delta)


def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise DataFormatError(f"cannot write {path}: {exc}") from exc


def result_to_dict(result, delta=None, rule_used=None):
    """JSON-ready view of a calibration result."""
    fam = result.family
    out = {
        "alpha": float(result.alpha),
        "delta": None if delta is None else float(delta),
        "residual_norm": float(result.residual_norm),
        "penalty": float(result.penalty),
        "iterations": int(result.iterations),
        "converged": bool(result.converged),
        "objective_trace": [float(v) for v in result.objective_trace],
        "axis": {
            "s_min": float(fam.axis.s_min),
            "s_max": float(fam.axis.s_max),
            "s_nodes": fam.axis.s_nodes.tolist(),
        },
        "grid": {
            "tau_nodes": fam.grid.tau_nodes.tolist(),
            "y_nodes": fam.grid.y_nodes.tolist(),
        },
        "slices": [s.values.tolist() for s in fam.slices],
    }
    if rule_used is not None:
        out["rule_used"] = str(rule_used)
    return out


def emit_results(result, path, delta=None, rule_used=None):
    """Write a calibration result as deterministic JSON."""
    payload = result_to_dict(result, delta=delta, rule_used=rule_used)
    _atomic_write(path, json.dumps(payload, sort_keys=True, indent=1) + "\n")


def load_results(path):
    """Read back what emit_results wrote (plain dict)."""
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc


def emit_table(rows, path, columns=None):
    """Write dict rows as CSV; empty row lists need explicit columns."""
    if columns is None:
        if not rows:
            raise InvalidArgumentError("empty table needs explicit columns")
        columns = list(rows[0])
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_cell(row[c]) for c in columns))
    _atomic_write(path, "\n".join(lines) + "\n")


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def load_table(path):
    """Read a CSV written by emit_table as a list of string dicts."""
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
