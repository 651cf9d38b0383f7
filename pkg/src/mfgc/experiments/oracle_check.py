"""
Oracle check: the Picard solvers against the closed-form LQ solutions, plus
the integrator-order check on a model whose equilibrium controls vary in time.
"""

import logging
from typing import Dict, List, Optional

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
    make_model,
    output_dir,
    solver_config,
    write_table,
)
from mfgc.game.builtin import lq_model_from_params
from mfgc.lq import GameMode, classify_degeneracy, solve_mfg_lq, solve_nplayer_lq
from mfgc.metrics import observed_order
from mfgc.schemas import ExperimentConfig
from mfgc.solvers import gaussian_initial_sampler, solve_mfg_particles, solve_nplayer_deterministic
from mfgc.utils.logger import Logger

logger = logging.getLogger(__name__)

COLUMNS = ("check", "steps", "value", "tolerance", "passed")


def _row(check: str, value: float, tolerance: Optional[float], steps: int, passed: Optional[bool] = None) -> Dict:
    if passed is None and tolerance is not None:
        passed = value <= tolerance
    return {"check": check, "steps": steps, "value": float(value), "tolerance": tolerance, "passed": passed}


def _nplayer_rows(config: ExperimentConfig, z: np.ndarray, steps: int, label: str) -> List[Dict]:
    grid = make_grid(config, steps)
    params = lq_params(config, initial_positions=tuple(z))
    oracle = solve_nplayer_lq(params, grid)
    bundle, report = solve_nplayer_deterministic(lq_model_from_params(params), z, grid, solver_config(config))
    costate = oracle.r[None, :] * oracle.X + oracle.p
    tol = config.oracle_tol if label == "nplayer" else None
    return [
        _row(f"{label}_X_err", np.max(np.abs(bundle.X - oracle.X)), tol, steps),
        _row(f"{label}_Y_err", np.max(np.abs(bundle.Y - costate)), tol, steps),
        _row(f"{label}_A_err", np.max(np.abs(bundle.A - oracle.controls)), tol, steps),
        _row(f"{label}_outer_iterations", report.outer_iterations, None, steps),
    ]


def _mfg_rows(config: ExperimentConfig) -> List[Dict]:
    section = config.oracle_check
    grid = make_grid(config)
    params = lq_params(config)
    sampler = gaussian_initial_sampler(config.init.mu0, config.init.s0)
    bundle, report = solve_mfg_particles(
        lq_model_from_params(params), sampler, section.n_particles, grid, solver_config(config), seed=config.seed
    )

    # The particle system is the mean field game started from its own empirical law
    z = bundle.X[:, 0]
    empirical = solve_mfg_lq(lq_params(config, gaussian_init=(float(z.mean()), config.init.s0)), grid)
    X_hat, A_hat = empirical.copy_paths(z, grid.nodes)
    Y_hat = empirical.gradient(grid.nodes[None, :], X_hat)

    exact = solve_mfg_lq(params, grid)
    mean_path = bundle.X.mean(axis=0)
    if section.n_particles > 1:
        band = section.mfg_sigmas * bundle.X.std(axis=0, ddof=1) / np.sqrt(section.n_particles)
        band_ratio = float(np.max(np.abs(mean_path - exact.mu_curve) / (band + config.oracle_tol)))
    else:
        band_ratio = float("nan")

    tol = config.oracle_tol
    return [
        _row("mfg_X_err", np.max(np.abs(bundle.X - X_hat)), tol, grid.steps),
        _row("mfg_Y_err", np.max(np.abs(bundle.Y - Y_hat)), tol, grid.steps),
        _row("mfg_A_err", np.max(np.abs(bundle.A - A_hat)), tol, grid.steps),
        _row("mfg_mean_band_ratio", band_ratio, None, grid.steps),
        _row("mfg_outer_iterations", report.outer_iterations, None, grid.steps),
    ]


def _order_rows(config: ExperimentConfig, z: np.ndarray) -> List[Dict]:
    """Self-convergence on successive doublings: d_k = sup |X_{M_k} - X_{M_{k+1}}| on the coarse nodes."""
    section = config.oracle_check
    model = make_model(section.order_model)
    solutions = [
        solve_nplayer_deterministic(model, z, make_grid(config, m), solver_config(config))[0]
        for m in section.order_steps
    ]
    diffs = [
        float(np.max(np.abs(coarse.X - fine.X[:, ::2])) + np.max(np.abs(coarse.A - fine.A[:, ::2])))
        for coarse, fine in zip(solutions, solutions[1:])
    ]
    steps = section.order_steps[:-1]
    orders = observed_order(diffs, steps)
    lo, hi = section.order_band

    rows = [_row("order_diff", d, None, m) for d, m in zip(diffs, steps)]
    for k, p in enumerate(orders):
        ratio = 2.0**p
        # Only the finest pair decides; coarse pairs are pre-asymptotic
        decisive = k == len(orders) - 1
        rows.append(_row("order_ratio", ratio, hi, steps[k + 1], (lo <= ratio <= hi) if decisive else None))
    return rows


def _plot_script(title: str) -> str:
    return "\n".join([
        "set datafile separator ','",
        "set datafile commentschars '#'",
        f"set title '{title}'",
        "set xlabel 'steps'",
        "set ylabel 'sup difference'",
        "set logscale xy",
        f"plot '{TABLE_NAME}' using (strcol('check') eq 'order_diff' ? column('steps') : NaN):(column('value')) "
        "with linespoints title 'successive-grid difference'",
    ]) + "\n"


def run_oracle_check(config: ExperimentConfig, log: Optional[Logger] = None) -> ExperimentOutcome:
    """
    Compare solve_nplayer_deterministic with solve_nplayer_lq and
    solve_mfg_particles with solve_mfg_lq, then check the integrator order.
    Degenerate parameters end the run with a failed outcome citing the classification.
    """
    log = log or Logger(quiet=True)
    digest = config_hash(config)
    directory = output_dir(config, digest)
    log.log_header(f"oracle-check [{digest}]")

    z = draw_initial(config, cell_rng(config.seed, 0), config.n_players)
    reports = {
        "nplayer": classify_degeneracy(lq_params(config, initial_positions=tuple(z)), GameMode.NPLAYER),
        "mean_field": classify_degeneracy(lq_params(config), GameMode.MEAN_FIELD),
    }
    degenerate = {k: r for k, r in reports.items() if not r.regular}
    if degenerate:
        rows = [
            {"check": f"{k}_degeneracy", "steps": config.grid.steps, "value": r.classification.value,
             "tolerance": None, "passed": False}
            for k, r in degenerate.items()
        ]
        write_table(directory / TABLE_NAME, COLUMNS, rows, digest)
        summary = [f"{k}: {r.classification.value} ({r.violated_condition})" for k, r in degenerate.items()]
        for line in summary:
            log.log_warning(line)
        return finish(config, digest, directory, False,
                      {"degeneracy": {k: r.model_dump(mode="json") for k, r in degenerate.items()}}, summary)

    rows: List[Dict] = []
    with log.progress("Solving N-player system..."):
        rows += _nplayer_rows(config, z, config.grid.steps, "nplayer")
        if config.grid.steps % 2 == 0:
            rows += _nplayer_rows(config, z, config.grid.steps // 2, "nplayer_half")
    with log.progress("Solving mean-field particle system..."):
        rows += _mfg_rows(config)
    with log.progress("Checking integrator order..."):
        rows += _order_rows(config, z)

    write_table(directory / TABLE_NAME, COLUMNS, rows, digest)
    (directory / PLOT_NAME).write_text(_plot_script("oracle-check: integrator order"))
    log.log_table(COLUMNS, rows)

    failures = [r["check"] for r in rows if r["passed"] is False]
    passed = not failures
    summary = [f"{r['check']}: {r['value']:.3e}" for r in rows if r["tolerance"] is not None]
    if failures:
        summary.append(f"failed: {', '.join(failures)}")
    report = {"checks": rows, "failures": failures, "degeneracy": {k: r.model_dump(mode="json") for k, r in reports.items()}}
    return finish(config, digest, directory, passed, report, summary)
