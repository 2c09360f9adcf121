"""Command-line interface: pricing, calibration, and study tables.

Three subcommands share one entry point.  ``price`` solves the forward
problem for a configured variance surface and writes the price surface
as JSON; with a constant variance it can also report the error against
the closed-form value.  ``calibrate`` fits a variance family to market
quotes or to freshly generated synthetic data, either at a fixed
regularization weight or with the weight chosen by the discrepancy
principle, and writes the result as JSON.  ``experiment`` runs one of
the packaged studies and writes its table as CSV.

Exit codes: 0 success, 2 bad configuration or data, 3 numerical
failure, 4 no weight satisfied the discrepancy principle.  All
configuration is validated before any solve starts, and output files
are written atomically, so a failing run never leaves partial output.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .data_io import (
    _atomic_write,
    emit_results,
    emit_table,
    load_market_quotes,
    quotes_to_family,
)
from .errors import (
    DataFormatError,
    DomainError,
    InvalidArgumentError,
    NoSelectionError,
    NumericalError,
    VolcalError,
)
from .experiments import (
    STUDIES,
    StudyScale,
    admissible_set,
    benchmark_truth,
    generate_study_data,
    solver_config,
)
from .grids import Grid2D, SpotAxis, Surface, SurfaceFamily, interpolate_surface
from .morozov import MorozovConfig, NoisyData, select_alpha
from .pricing import MarketParams, bs_price, solve_dupire
from .tikhonov import minimize

DEFAULT_PRICE_CONFIG = {
    "grid": {"t_max": 1.0, "dt": 0.01, "y_max": 5.0, "dy": 0.1},
    "spot": 30.0,
    "b": 0.03,
    "variance": {"kind": "constant", "sigma": 0.4},
}


def _config_number(section, key, value, positive=False):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise DataFormatError(f"{section}.{key} must be a number, got {value!r}")
    out = float(value)
    if positive and not out > 0.0:
        raise DataFormatError(f"{section}.{key} must be positive, got {out}")
    if not np.isfinite(out):
        raise DataFormatError(f"{section}.{key} must be finite, got {out}")
    return out


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise DataFormatError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise DataFormatError(f"{path}: config must be a JSON object")
    return raw


def _price_setup(raw):
    """Validate a price config and build (grid, params, variance, kind)."""
    known = {"grid", "spot", "b", "variance"}
    for key in raw:
        if key not in known:
            raise DataFormatError(f"unknown config field {key!r}")

    grid_raw = dict(DEFAULT_PRICE_CONFIG["grid"])
    user_grid = raw.get("grid", {})
    if not isinstance(user_grid, dict):
        raise DataFormatError("grid must be an object")
    for key in user_grid:
        if key not in grid_raw:
            raise DataFormatError(f"unknown config field grid.{key!r}")
    grid_raw.update(user_grid)
    grid = Grid2D.from_steps(
        _config_number("grid", "t_max", grid_raw["t_max"], positive=True),
        _config_number("grid", "dt", grid_raw["dt"], positive=True),
        _config_number("grid", "y_max", grid_raw["y_max"], positive=True),
        _config_number("grid", "dy", grid_raw["dy"], positive=True),
    )

    spot = _config_number("config", "spot", raw.get("spot", 30.0), positive=True)
    b = _config_number("config", "b", raw.get("b", 0.03))
    params = MarketParams(b=b, spot=spot)

    var_raw = raw.get("variance", DEFAULT_PRICE_CONFIG["variance"])
    if not isinstance(var_raw, dict) or "kind" not in var_raw:
        raise DataFormatError("variance must be an object with a 'kind' field")
    kind = var_raw["kind"]

    if kind == "constant":
        if "sigma" in var_raw and "variance" in var_raw:
            raise DataFormatError("variance: give either sigma or variance, not both")
        if "variance" in var_raw:
            level = _config_number("variance", "variance", var_raw["variance"], positive=True)
        else:
            sigma = _config_number("variance", "sigma", var_raw.get("sigma", 0.4), positive=True)
            level = sigma**2
        surface = Surface.constant(grid, level)
    elif kind == "file":
        if "path" not in var_raw:
            raise DataFormatError("variance.path is required for kind 'file'")
        loaded = _load_config(var_raw["path"])
        for key in ("tau_nodes", "y_nodes", "values"):
            if key not in loaded:
                raise DataFormatError(f"variance file {var_raw['path']}: missing {key!r}")
        try:
            src_grid = Grid2D(
                np.asarray(loaded["tau_nodes"], float),
                np.asarray(loaded["y_nodes"], float),
            )
            src = Surface(src_grid, np.asarray(loaded["values"], float))
        except (TypeError, ValueError) as exc:
            raise DataFormatError(
                f"variance file {var_raw['path']}: {exc}"
            ) from exc
        surface = interpolate_surface(src, grid)
    elif kind == "synthetic":
        tau, y = grid.mesh()
        surface = Surface(grid, benchmark_truth(0.0, tau, y))
    else:
        raise DataFormatError(f"variance.kind must be constant, file, or synthetic, got {kind!r}")

    return grid, params, surface, kind


def cmd_price(args):
    raw = _load_config(args.config) or dict(DEFAULT_PRICE_CONFIG)
    grid, params, variance, kind = _price_setup(raw)
    if args.oracle and kind != "constant":
        raise DataFormatError("--oracle needs variance.kind = constant")

    priced = solve_dupire(variance, params)

    payload = {
        "spot": params.spot,
        "b": params.b,
        "variance_kind": kind,
        "tau_nodes": grid.tau_nodes.tolist(),
        "y_nodes": grid.y_nodes.tolist(),
        "values": priced.values.tolist(),
    }

    if args.oracle:
        sigma = float(np.sqrt(variance.values[0, 0]))
        band = np.abs(grid.y_nodes) <= 1.0 + 1e-12
        strikes = params.spot * np.exp(grid.y_nodes[band])
        exact = bs_price(sigma, params, strikes, float(grid.tau_nodes[-1]))
        err = np.abs(priced.values[-1, band] - exact)
        band_error = float(err.max() / np.abs(exact).max())
        nodal_error = float((err / np.abs(exact)).max())
        payload["oracle"] = {
            "sigma": sigma,
            "band_relative_error": band_error,
            "max_nodal_relative_error": nodal_error,
        }
        print(
            f"oracle sigma={sigma:g}: relative error (max norm) {band_error:.3e}, "
            f"worst nodal relative error {nodal_error:.3e} on |y| <= 1 at tau = "
            f"{grid.tau_nodes[-1]:g}"
        )

    _atomic_write(args.out, json.dumps(payload, sort_keys=True, indent=1) + "\n")
    print(f"wrote {args.out}")
    return 0


def _synthetic_data(args):
    scale = StudyScale.pick(args.full)
    data, _truth, _clean = generate_study_data(scale, args.delta, args.seed)
    return scale.coarse_grid, scale.axis, data


def _market_data(args):
    scale = StudyScale.pick(args.full)
    grid = scale.coarse_grid
    quotes = load_market_quotes(args.data)
    dates = {}
    for quote in quotes:
        dates.setdefault(quote.quote_date, []).append(quote.underlying)
    means = sorted(float(np.mean(v)) for v in dates.values())
    if len(means) == 1:
        axis = SpotAxis.single(means[0])
    else:
        axis = SpotAxis.from_range(means[0], means[-1], len(means))
    data = quotes_to_family(quotes, grid, axis, b=0.03)
    if args.delta is not None:
        data = NoisyData(data.obs, args.delta)
    return grid, axis, data


def cmd_calibrate(args):
    if args.alpha != "morozov":
        try:
            fixed_alpha = float(args.alpha)
        except ValueError:
            raise DataFormatError(
                f"--alpha must be a number or 'morozov', got {args.alpha!r}"
            ) from None
        if not fixed_alpha > 0.0:
            raise DataFormatError(f"--alpha must be positive, got {fixed_alpha}")
    else:
        fixed_alpha = None

    if args.data == "synthetic":
        if args.delta is None:
            args.delta = 0.035
        grid, axis, data = _synthetic_data(args)
    else:
        grid, axis, data = _market_data(args)

    if args.mode == "standard":
        if not 0 <= args.slice < axis.n_slices:
            raise DataFormatError(
                f"--slice must lie in [0, {axis.n_slices - 1}], got {args.slice}"
            )
        axis = SpotAxis.single(float(axis.spots[args.slice]))
        data = NoisyData(
            SurfaceFamily(axis, (data.obs.slices[args.slice],)), data.delta
        )

    q_set = admissible_set(grid, axis)
    cfg = solver_config(args.threads)

    if fixed_alpha is not None:
        from dataclasses import replace

        result = minimize(data.obs, q_set, replace(cfg, alpha=fixed_alpha))
        emit_results(result, args.out, delta=data.delta)
    else:
        mcfg = MorozovConfig.default_for(data)
        alpha, result, rule = select_alpha(data, q_set, cfg, mcfg)
        emit_results(result, args.out, delta=data.delta, rule_used=rule)
    print(f"wrote {args.out}")
    return 0


def cmd_experiment(args):
    if args.out is None:
        args.out = f"{args.name}.csv"
    rows = STUDIES[args.name](full=args.full, seed=args.seed, threads=args.threads)
    emit_table(rows, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="volcal",
        description="Local variance calibration from call prices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_price = sub.add_parser("price", help="solve the forward pricing problem")
    p_price.add_argument("--config", help="JSON config (grid, spot, b, variance)")
    p_price.add_argument("--out", default="price_surface.json")
    p_price.add_argument(
        "--oracle",
        action="store_true",
        help="with constant variance, report error vs the closed form",
    )
    p_price.set_defaults(func=cmd_price)

    p_cal = sub.add_parser("calibrate", help="fit a variance family to prices")
    p_cal.add_argument(
        "--data",
        required=True,
        help="market quote CSV path, or 'synthetic' for generated data",
    )
    p_cal.add_argument("--mode", choices=("online", "standard"), default="online")
    p_cal.add_argument(
        "--slice", type=int, default=0, help="slice index for standard mode"
    )
    p_cal.add_argument(
        "--alpha", default="morozov", help="fixed weight, or 'morozov' to select"
    )
    p_cal.add_argument(
        "--delta",
        type=float,
        default=None,
        help="synthetic noise level / noise-level override for quote data",
    )
    p_cal.add_argument("--seed", type=int, default=0)
    p_cal.add_argument("--threads", type=int, default=1)
    p_cal.add_argument("--out", default="calibration.json")
    p_cal.add_argument("--full", action="store_true", help="full-resolution grids")
    p_cal.set_defaults(func=cmd_calibrate)

    p_exp = sub.add_parser("experiment", help="run a packaged study")
    p_exp.add_argument("name", choices=sorted(STUDIES))
    p_exp.add_argument("--seed", type=int, default=0)
    p_exp.add_argument("--threads", type=int, default=1)
    p_exp.add_argument("--out", default=None, help="CSV path (default <name>.csv)")
    p_exp.add_argument("--full", action="store_true", help="full-resolution grids")
    p_exp.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoSelectionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for alpha, residual, stage in exc.trace:
            print(f"  alpha={alpha:.6g} residual={residual:.6g} ({stage})", file=sys.stderr)
        return 4
    except (DataFormatError, InvalidArgumentError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
