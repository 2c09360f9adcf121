"""Calibration of spot-indexed local variance surfaces from call prices."""

from .errors import (
    DataFormatError,
    DomainError,
    InvalidArgumentError,
    NoSelectionError,
    NumericalError,
    VolcalError,
)
from .grids import (
    Grid2D,
    SpotAxis,
    Surface,
    SurfaceFamily,
    family_l2_inner,
    family_l2_norm,
    interpolate_surface,
    make_payoff,
    surface_l2_inner,
    surface_l2_norm,
)
from .pricing import MarketParams, bs_price, forward_operator, prior_price_family, solve_dupire
from .adjoint import misfit_gradient, solve_adjoint
from .bochner import (
    BochnerParams,
    riesz_smooth,
    sup_estimate_check,
    x_inner,
    x_norm,
)
from .tikhonov import (
    AdmissibleSet,
    CalibrationResult,
    TikhonovConfig,
    bregman_distance,
    minimize,
    project_Q,
    tikhonov_objective,
)
from .morozov import (
    MorozovConfig,
    NoisyData,
    discrepancy,
    rate_diagnostics,
    select_alpha,
)
from .data_io import (
    MarketQuote,
    SyntheticSpec,
    emit_results,
    emit_table,
    generate_synthetic,
    half_mean_spread,
    load_market_quotes,
    load_results,
    load_table,
    quotes_to_family,
    result_to_dict,
    synth_truth_surface,
)

__version__ = "0.1.0"
