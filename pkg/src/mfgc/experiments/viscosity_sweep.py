"""
Viscosity sweep over a descending list of noise levels for the N-player LQ game.

The equilibrium gains K and C do not depend on beta; only the constant term q
of each value function moves, by beta times the integral of r. The sweep
checks both statements against the oracle, measures the cost offset by Monte
Carlo and reruns the deviation test at every noise level.
"""

import logging
import math
from typing import Dict, Optional

import numpy as np

from mfgc.experiments.common import (
    PLOT_NAME,
    TABLE_NAME,
    ExperimentOutcome,
    cell_rng,
    config_hash,
    draw_initial,
    finish,
    lq_params,
    make_grid,
    output_dir,
    r_squared,
    run_cells,
    sim_config,
    write_table,
)
from mfgc.game.builtin import lq_model_from_params
from mfgc.lq import LqNPlayerSolution, solve_nplayer_lq
from mfgc.schemas import ExperimentConfig
from mfgc.sim import CostEstimate, FeedbackSet, Verdict, deviation_test, pathwise_costs, simulate
from mfgc.utils.logger import Logger

logger = logging.getLogger(__name__)

GAIN_TOL = 1e-12

COLUMNS = (
    "beta", "offset_oracle", "offset_analytic", "offset_mc", "offset_mc_stderr",
    "gain_change", "grad_gap", "deviation_passed", "deviation_failures",
)


def integrated_riccati(params) -> float:
    """int_0^T r(s) ds = (1+gamma) log((T+1+gamma)/(1+gamma))."""
    g = params.lam
    return g * math.log((params.horizon + g) / g)


def _mean_cost(feedbacks: FeedbackSet, z, model, config) -> CostEstimate:
    ensemble = simulate(feedbacks, z, config, model, keep_paths=False)
    return CostEstimate.from_samples(pathwise_costs(ensemble, model).mean(axis=0))


def run_viscosity_sweep(config: ExperimentConfig, log: Optional[Logger] = None) -> ExperimentOutcome:
    """Offsets, gain invariance and deviation verdicts for each beta in config.viscosity_sweep.betas."""
    log = log or Logger(quiet=True)
    section = config.viscosity_sweep
    digest = config_hash(config)
    directory = output_dir(config, digest)
    log.log_header(f"viscosity-sweep [{digest}]")

    grid = make_grid(config)
    z = draw_initial(config, cell_rng(config.seed, 0), config.n_players)
    params = lq_params(config, initial_positions=tuple(z))
    model = lq_model_from_params(params)
    noiseless: LqNPlayerSolution = solve_nplayer_lq(params, grid)
    noiseless_cost = _mean_cost(FeedbackSet.from_lq(noiseless), z, model, sim_config(config, 0.0))

    lo, hi = float(noiseless.X.min()) - 1.0, float(noiseless.X.max()) + 1.0
    area = integrated_riccati(params)

    def cell(index: int) -> Dict:
        beta = section.betas[index]
        log.log_cell_start(f"beta={beta:g}")
        solution = solve_nplayer_lq(params.model_copy(update={"beta": beta}), grid)
        gain_change = max(
            float(np.max(np.abs(solution.K - noiseless.K))),
            float(np.max(np.abs(solution.C - noiseless.C))),
        )
        dr = solution.r - noiseless.r
        dp = solution.p - noiseless.p
        grad_gap = max(float(np.max(np.abs(dr * x + dp))) for x in (lo, hi))

        feedbacks = FeedbackSet.from_lq(solution)
        sim = sim_config(config, beta)
        cost = _mean_cost(feedbacks, z, model, sim)
        row = {
            "beta": beta,
            "offset_oracle": float(np.mean(solution.q[:, 0] - noiseless.q[:, 0])),
            "offset_analytic": beta * area,
            "offset_mc": cost.mean - noiseless_cost.mean,
            "offset_mc_stderr": cost.stderr,
            "gain_change": gain_change,
            "grad_gap": grad_gap,
        }
        if section.deviation:
            report = deviation_test(feedbacks, model, 0, None, sim, z)
            row["deviation_passed"] = report.passed
            row["deviation_failures"] = sum(r.verdict == Verdict.FAIL for r in report.results)
        log.log_cell_done(f"beta={beta:g}", f"offset={row['offset_mc']:.4g}")
        return row

    rows = [row for _, row in run_cells(cell, range(len(section.betas)), config.threads)]
    write_table(directory / TABLE_NAME, COLUMNS, rows, digest)
    (directory / PLOT_NAME).write_text("\n".join([
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set title 'viscosity-sweep: value offset against beta'",
        "set xlabel 'beta'",
        "set key left top",
        f"plot '{TABLE_NAME}' using (column('beta')):(column('offset_oracle')) with linespoints title 'oracle', \\",
        f"     '{TABLE_NAME}' using (column('beta')):(column('offset_mc')):(column('offset_mc_stderr')) "
        "with yerrorbars title 'Monte Carlo'",
    ]) + "\n")
    log.log_table(list(COLUMNS), rows)

    betas = [row["beta"] for row in rows]
    checks = {
        "gains_unchanged": all(row["gain_change"] <= GAIN_TOL for row in rows),
        "grad_gap_zero": all(row["grad_gap"] <= GAIN_TOL for row in rows),
        "offset_matches_integral": all(
            abs(row["offset_oracle"] - row["offset_analytic"]) <= config.oracle_tol * max(1.0, row["offset_analytic"])
            for row in rows
        ),
    }
    fit = None
    if len(set(betas)) >= 3:
        slope, intercept, r2 = r_squared(betas, [row["offset_mc"] for row in rows])
        fit = {"slope": slope, "intercept": intercept, "r2": r2, "integral_of_r": area}
        checks["offset_linear_in_beta"] = r2 >= section.min_r2
    if section.deviation:
        checks["deviation_pass_every_beta"] = all(row["deviation_passed"] for row in rows)

    passed = all(checks.values())
    summary = [f"{name}: {'ok' if ok else 'FAILED'}" for name, ok in checks.items()]
    if fit is not None:
        summary.append(f"offset slope {fit['slope']:.4g} (integral of r {area:.4g}), R^2 {fit['r2']:.4f}")
    report = {"checks": checks, "fit": fit, "noiseless_cost": noiseless_cost.mean}
    return finish(config, digest, directory, passed, report, summary)
