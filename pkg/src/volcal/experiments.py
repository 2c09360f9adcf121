"""Reproducible synthetic calibration studies.

Every study prices a known benchmark variance family on a fine grid,
perturbs the prices with seeded Gaussian noise, interpolates down to the
inversion grid, selects the regularization weight by discrepancy, and
reports reconstruction quality.  The desk scale keeps each study in the
seconds-to-minutes range; ``full=True`` switches to the finer production
grids.  All randomness flows through the ``seed`` argument, so repeated
runs produce identical tables.

Generating data on a finer grid than the inversion sees (the usual guard
against inverting one's own discretization) makes the data error two
parts: the seeded noise and the systematic gap between the fine-grid
prices and what the inversion model assigns to the true coefficient.
The discrepancy band must be calibrated to the whole error, so each
study selects with delta = ||obs - model(truth)||, computable exactly
here because the truth is known.  Selecting with the noise norm alone
would demand a fit below the systematic floor, driving the weight toward
zero and overfitting the very noise the band is meant to reject.  Tables
record both components.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bochner import BochnerParams
from .data_io import SyntheticSpec, generate_synthetic, synth_truth_surface
from .grids import (
    Grid2D,
    SpotAxis,
    Surface,
    SurfaceFamily,
    family_l2_norm,
    surface_l2_norm,
)
from .morozov import MorozovConfig, NoisyData, rate_diagnostics, select_alpha
from .pricing import forward_operator
from .tikhonov import AdmissibleSet, TikhonovConfig

#: admissible variance box and the flat prior used throughout the studies
BOX_LO = 0.01
BOX_HI = 0.5
PRIOR_A0 = 0.4
CARRY = 0.03

#: spot range of the benchmark family (absolute price levels)
SPOT_LO = 29.5
SPOT_HI = 32.5


@dataclass(frozen=True)
class StudyScale:
    """Grid/axis bundle for one resolution tier."""

    fine_grid: Grid2D
    coarse_grid: Grid2D
    axis: SpotAxis

    @classmethod
    def desk(cls):
        # data generated at twice the inversion's time resolution
        # (nested, so downsampling is exact at shared nodes): a different
        # discrete operator produces the data, while the benchmark's
        # variance cliff is sampled identically on both grids -- coarser
        # y-sampling of a discontinuity would inject an O(sqrt(dy))
        # systematic error that swamps the noise levels under study
        return cls(
            fine_grid=Grid2D.from_steps(1.0, 0.01, 5.0, 0.1),
            coarse_grid=Grid2D.from_steps(1.0, 0.02, 5.0, 0.1),
            axis=SpotAxis.from_range(SPOT_LO, SPOT_HI, 7),
        )

    @classmethod
    def full(cls):
        return cls(
            fine_grid=Grid2D.from_steps(1.0, 0.002, 5.0, 0.01),
            coarse_grid=Grid2D.from_steps(1.0, 0.01, 5.0, 0.1),
            axis=SpotAxis.from_range(SPOT_LO, SPOT_HI, 13),
        )

    @classmethod
    def pick(cls, full=False):
        return cls.full() if full else cls.desk()


def benchmark_truth(s, tau, y):
    """Benchmark variance clamped into the admissible box."""
    return np.clip(synth_truth_surface(s, tau, y), BOX_LO, BOX_HI)


def smooth_truth(s, tau, y):
    """Gaussian-dip variance surface, mildly decaying in maturity.

    Values stay well inside the admissible box, and every feature is
    smooth, so a gradient fit can track it to small residuals.  The
    trend studies use it where the question is what the data supports,
    not how well the optimizer copes with the benchmark's cliff.  The
    surface is the same at every spot: any variation across the family
    axis in data generated from it is noise, which makes it the right
    truth for studies that isolate how added surfaces average noise
    away.  The spot-direction penalty prices an s-constant family by its
    leading cosine mode alone, identically however densely the axis is
    sampled, so no ladder row is favored by series truncation.
    """
    del s
    dip = 0.15 * np.exp(-0.5 * (np.asarray(y) / 0.5) ** 2)
    return PRIOR_A0 - dip * (1.0 - 0.3 * np.asarray(tau))


def smooth_smile_family(grid, axis):
    """The smooth truth sampled as a family on the given grid and axis."""
    tau, y = grid.mesh()
    return SurfaceFamily(
        axis, tuple(Surface(grid, smooth_truth(s, tau, y)) for s in axis.s_nodes)
    )


def admissible_set(grid, axis):
    return AdmissibleSet.with_constant_prior(
        BOX_LO, BOX_HI, Surface.constant(grid, PRIOR_A0), axis
    )


def solver_config(threads=1, alpha=1.0):
    # budget sized so a cold solve can reach the smallest discrepancy
    # bands under study, keeping selection independent of probe order
    return TikhonovConfig(
        alpha=alpha,
        b=CARRY,
        max_iters=800,
        threads=threads,
        bochner=BochnerParams(),
    )


def generate_study_data(scale, noise_std, seed, truth=benchmark_truth):
    spec = SyntheticSpec(
        truth=truth,
        fine_grid=scale.fine_grid,
        coarse_grid=scale.coarse_grid,
        axis=scale.axis,
        noise_std=noise_std,
        b=CARRY,
        seed=seed,
        prior_a0=PRIOR_A0,
    )
    return generate_synthetic(spec)


def _select(data, q_set, cfg):
    trace = []
    mcfg = MorozovConfig.default_for(data)
    alpha, result, rule = select_alpha(data, q_set, cfg, mcfg, trace_out=trace)
    return alpha, result, rule, trace


def truth_model_prices(truth_c, q_set, axis, threads=1):
    """Inversion-model prices of the true coefficient.

    The reference point for the full data error: obs minus this is noise
    plus the fine-to-coarse systematic gap.
    """
    return forward_operator(truth_c, q_set.prior, axis, CARRY, threads)


def mean_slice_error(fam, ref):
    """Per-slice L2 distances averaged over the family (unweighted)."""
    return float(
        np.mean(
            [surface_l2_norm(a - b) for a, b in zip(fam.slices, ref.slices)]
        )
    )


def run_fig1(full=False, seed=0, threads=1):
    """Reconstruction accuracy at two noise levels (same seeded draw).

    One row per noise level: the realized noise norm, the systematic
    model gap, the full data error used for selection, the selected
    alpha and rule, the data residual, the distance of the fitted prices
    to the model prices of the truth, and the family-norm reconstruction
    error.  Shrinking the noise must shrink the error.
    """
    scale = StudyScale.pick(full)
    q_set = admissible_set(scale.coarse_grid, scale.axis)
    cfg = solver_config(threads)
    rows = []
    for noise_std in (0.035, 0.01):
        data, truth_c, clean = generate_study_data(scale, noise_std, seed)
        model_ref = truth_model_prices(truth_c, q_set, scale.axis, threads)
        delta_used = family_l2_norm(data.obs - model_ref)
        alpha, result, rule, trace = _select(
            NoisyData(data.obs, delta_used), q_set, cfg
        )
        fitted = forward_operator(
            result.family, q_set.prior, scale.axis, CARRY, threads
        )
        rows.append(
            {
                "noise_std": noise_std,
                "noise_delta": data.delta,
                "model_gap": family_l2_norm(clean - model_ref),
                "delta": delta_used,
                "alpha": alpha,
                "rule": rule,
                "residual": result.residual_norm,
                "residual_to_truth": family_l2_norm(fitted - model_ref),
                "recon_error": mean_slice_error(result.family, truth_c),
                "iterations": result.iterations,
                "probes": len(trace),
            }
        )
    return rows


def run_fig2(full=False, seed=0, threads=1):
    """Per-slice error: independent single-surface runs vs one joint run.

    Both see the same noisy prices (noise level 0.035).  The joint run
    selects a single alpha for the whole family; the standard runs select
    alpha per slice against that slice's own data error.
    """
    scale = StudyScale.pick(full)
    data, truth_c, _ = generate_study_data(scale, 0.035, seed)

    cfg = solver_config(threads)
    q_set = admissible_set(scale.coarse_grid, scale.axis)
    model_ref = truth_model_prices(truth_c, q_set, scale.axis, threads)
    gap = data.obs - model_ref
    delta_used = family_l2_norm(gap)
    alpha_on, res_on, rule_on, _ = _select(
        NoisyData(data.obs, delta_used), q_set, cfg
    )

    rows = []
    for i in range(scale.axis.n_slices):
        spot = float(scale.axis.spots[i])
        axis_i = SpotAxis.single(spot)
        obs_i = SurfaceFamily(axis_i, (data.obs.slices[i],))
        data_i = NoisyData(obs_i, surface_l2_norm(gap.slices[i]))
        q_i = admissible_set(scale.coarse_grid, axis_i)
        alpha_std, res_std, rule_std, _ = _select(data_i, q_i, cfg)
        truth_i = truth_c.slices[i]
        rows.append(
            {
                "slice": i,
                "spot": spot,
                "standard_error": surface_l2_norm(res_std.family.slices[0] - truth_i),
                "online_error": surface_l2_norm(res_on.family.slices[i] - truth_i),
                "standard_alpha": alpha_std,
                "online_alpha": alpha_on,
                "standard_rule": rule_std,
                "online_rule": rule_on,
            }
        )
    return rows


def _fig3_axes():
    """Spot ladders for the sampling study: n surfaces spanning one range.

    Row 1 is the middle spot alone (the single-surface reference); every
    later row samples the full range evenly, endpoints included.  Returns
    per-row index arrays into a master axis whose step divides every row
    step (60 intervals cover 1 through 6 subdivisions), so row axes stay
    uniform and a spot shared by two rows is the same master node.
    """
    master = SpotAxis.from_range(SPOT_LO, SPOT_HI, 61)
    rows = [np.array([30])]
    rows += [np.arange(0, 61, 60 // (n - 1)) for n in range(2, 8)]
    return rows, master


def run_fig3(full=False, seed=0, threads=1):
    """Family error as a fixed spot range is sampled more densely.

    Row n calibrates n surfaces evenly spanning the same spot range in
    one joint run and reports the per-slice error to the truth averaged
    over that row's slices.  The standard column repeats the
    single-surface run at the middle spot (one price surface reused), so
    the table isolates what the extra surfaces contribute.  Surfaces
    couple through the spot-direction smoothing penalty while their
    noise draws stay independent, so sampling the same range more
    densely averages noise away and the online column should not get
    worse as n grows.

    Runs on the smooth smile family for the same reason the noise-ladder
    study does: the sampling trend is a statement about information in
    the data only when the minimizer can track the truth to the noise
    level, which the discontinuous benchmark's variance cliff prevents.
    Within each draw the rows share one master data set generated on the
    union of the row axes, so a spot two rows share carries the same
    noise; the table averages a few independent draws because a row
    holding as few as one or two surfaces barely averages the noise
    internally.  Linearity keeps the averaged residual inside the
    averaged discrepancy band row by row.
    """
    scale = StudyScale.pick(full)
    row_spots, master = _fig3_axes()
    master_scale = StudyScale(scale.fine_grid, scale.coarse_grid, master)
    cfg = solver_config(threads)
    q_master = admissible_set(scale.coarse_grid, master)

    draws = 4
    sums = [dict.fromkeys(("online_error", "delta", "alpha", "residual"), 0.0) for _ in row_spots]
    rules = [set() for _ in row_spots]
    for draw in range(draws):
        data, truth_c, _ = generate_study_data(
            master_scale, 0.06, seed + draw, smooth_truth
        )
        gap = data.obs - truth_model_prices(truth_c, q_master, master, threads)
        for acc, rule_set, idx in zip(sums, rules, row_spots):
            obs_n = data.obs.subset(idx)
            data_n = NoisyData(obs_n, family_l2_norm(gap.subset(idx)))
            q_n = admissible_set(scale.coarse_grid, obs_n.axis)
            alpha_n, res_n, rule_n, _ = _select(data_n, q_n, cfg)
            acc["online_error"] += mean_slice_error(res_n.family, truth_c.subset(idx))
            acc["delta"] += data_n.delta
            acc["alpha"] += alpha_n
            acc["residual"] += res_n.residual_norm
            rule_set.add(rule_n)

    rows = []
    standard_error = sums[0]["online_error"] / draws
    for acc, rule_set, idx in zip(sums, rules, row_spots):
        rows.append(
            {
                "n_surfaces": len(idx),
                "online_error": acc["online_error"] / draws,
                "standard_error": standard_error,
                "delta": acc["delta"] / draws,
                "alpha": acc["alpha"] / draws,
                "residual": acc["residual"] / draws,
                "rule": ",".join(sorted(rule_set)),
                "draws": draws,
            }
        )
    return rows


def run_rates(full=False, seed=0, threads=1):
    """Selection trends along the noise ladder 0.08 > 0.035 > 0.01.

    Runs on the smooth smile family rather than the discontinuous
    reconstruction benchmark: the ladder's smallest band demands a fit
    down to ~1% of the data norm, which is a statement about selection
    behavior only when the minimizer can actually track the truth that
    far -- against a variance cliff the band would instead measure the
    optimizer's resolution limit.
    """
    scale = StudyScale.pick(full)
    grid, axis = scale.coarse_grid, scale.axis
    truth = smooth_smile_family(grid, axis)
    q_set = admissible_set(grid, axis)
    cfg = solver_config(threads)
    mcfg = MorozovConfig()
    return rate_diagnostics((0.08, 0.035, 0.01), truth, q_set, cfg, mcfg, seed=seed)


STUDIES = {
    "fig1": run_fig1,
    "fig2": run_fig2,
    "fig3": run_fig3,
    "rates": run_rates,
}
