"""
N-sweep: convergence of N-player LQ equilibria to i.i.d. mean-field copies.

For every N the players' initial positions and the copies' starting points
are the same draws from m_0, so the measured gap isolates the effect of the
finite population.
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
    run_cells,
)
from mfgc.lq import LqMfgSolution, solve_mfg_lq, solve_nplayer_lq
from mfgc.metrics import (
    RateRow,
    RateTable,
    TailParams,
    concentration_bound,
    empirical_convergence_error,
    fournier_guillin_rate,
    initial_mismatch_K,
    write_gnuplot_script,
)
from mfgc.errors import DomainError
from mfgc.grid import TimeGrid
from mfgc.schemas import ExperimentConfig, NSweepSection
from mfgc.solvers import BundleMode, TrajectoryBundle
from mfgc.utils.logger import Logger

logger = logging.getLogger(__name__)

ZERO_COLUMN = 1e-14
GRAD_X_TOL = 1e-12


def _tail(q: float) -> TailParams:
    # Compact support has exponential moments of every order
    if math.isinf(q):
        return TailParams(regime="super_gaussian", sigma=3.0)
    return TailParams(regime="moment")


def _cell(config: ExperimentConfig, grid: TimeGrid, mean_field: LqMfgSolution, N: int) -> Dict[str, float]:
    section = config.n_sweep
    traj, value, grad, grad_x, rep = [], [], [], [], []
    for replicate in range(section.replicates):
        z = draw_initial(config, cell_rng(config.seed, N, replicate), N)
        game = solve_nplayer_lq(lq_params(config, initial_positions=tuple(z + section.shift)), grid)
        nplayer = TrajectoryBundle(
            BundleMode.NPLAYER, grid, game.X, game.r[None, :] * game.X + game.p, game.controls
        )
        X_hat, A_hat = mean_field.copy_paths(z, grid.nodes)
        copies = TrajectoryBundle(
            BundleMode.MEAN_FIELD_PARTICLES, grid, X_hat, mean_field.gradient(grid.nodes[None, :], X_hat), A_hat
        )
        gap = empirical_convergence_error(nplayer, copies, lq=(game, mean_field), widen=section.widen)
        traj.append(gap.traj_error)
        value.append(gap.value_gap)
        grad.append(gap.grad_gap)
        grad_x.append(gap.grad_gap_x)
        rep.append(gap.rep_error)
    logger.debug("N=%d: mean traj_error %.3e over %d replicates", N, np.mean(traj), section.replicates)
    return {
        "traj_error": float(np.mean(traj)),
        "value_gap": float(np.mean(value)),
        "grad_gap": float(np.mean(grad)),
        "grad_gap_x": float(np.max(grad_x)),
        "rep_error": float(np.mean(rep)),
    }


def _slope_ok(table: RateTable, column: str, limit: float) -> bool:
    if np.max(table.column(column)) <= ZERO_COLUMN:
        return True
    slope = table.slopes.get(column, math.nan)
    return math.isfinite(slope) and slope <= limit


def _slope_windows(table: RateTable, section: NSweepSection) -> Dict[str, Dict[str, object]]:
    """Fitted slope of each error column against its window [min, max]; the check only uses max."""
    windows = {}
    for column, prefix in (("traj_error", "traj"), ("value_gap", "value"), ("grad_gap", "grad")):
        low, high = getattr(section, f"{prefix}_slope_min"), getattr(section, f"{prefix}_slope_max")
        slope = table.slopes.get(column, math.nan)
        finite = math.isfinite(slope)
        windows[column] = {
            "slope": slope if finite else None,
            "window": [low, high],
            "in_window": finite and low <= slope <= high,
            "margin": high - slope if finite else None,
        }
    return windows


def run_n_sweep(config: ExperimentConfig, log: Optional[Logger] = None) -> ExperimentOutcome:
    """
    Rate table over config.n_sweep.n_list with log-log slopes; the outcome's
    result is the RateTable.
    """
    log = log or Logger(quiet=True)
    section = config.n_sweep
    digest = config_hash(config)
    directory = output_dir(config, digest)
    log.log_header(f"n-sweep [{digest}]")

    grid = make_grid(config)
    mean_field = solve_mfg_lq(lq_params(config), grid)
    q = math.inf if section.q is None else section.q

    # All players share one initial law, m_0 shifted by delta
    reference = draw_initial(config, cell_rng(config.seed, 0), section.reference_samples)
    K = initial_mismatch_K(reference, [reference + section.shift])

    def cell(N: int) -> Dict[str, float]:
        log.log_cell_start(f"N={N}")
        result = _cell(config, grid, mean_field, N)
        log.log_cell_done(f"N={N}", f"traj_error={result['traj_error']:.3e}")
        return result

    table = RateTable()
    extras = {}
    for N, result in run_cells(cell, section.n_list, config.threads):
        rate = fournier_guillin_rate(1, q, N)
        try:
            concentration = concentration_bound(section.epsilon, N, 1, q, _tail(q), K)
        except DomainError as e:
            logger.warning("Concentration bound skipped for N=%d: %s", N, e)
            concentration = None
        table.add(RateRow(
            N=N,
            traj_error=result["traj_error"],
            value_gap=result["value_gap"],
            grad_gap=result["grad_gap"],
            K_N=K,
            r_dq_N=rate,
            bound=section.bound_constant * (K + rate),
        ))
        extras[str(N)] = {
            "rep_error": result["rep_error"],
            "grad_gap_x": result["grad_gap_x"],
            "concentration_bound": concentration,
        }

    slopes = table.fit_slopes(discard_first=1) if len(table.rows) >= 2 else {}
    table.to_csv(directory / TABLE_NAME, header=f"config_hash={digest}")
    write_gnuplot_script(
        directory / PLOT_NAME, TABLE_NAME, ["traj_error", "value_gap", "grad_gap", "bound"],
        title="n-sweep: errors against N",
    )
    log.log_table(["N", "traj_error", "value_gap", "grad_gap", "K_N", "r_dq_N", "bound"],
                  [vars(row) for row in table.rows])

    checks = {"grad_gap_x_zero": max(e["grad_gap_x"] for e in extras.values()) <= GRAD_X_TOL}
    if section.shift == 0.0 and len(table.rows) >= 2:
        checks["traj_slope"] = _slope_ok(table, "traj_error", section.traj_slope_max)
        checks["value_slope"] = _slope_ok(table, "value_gap", section.value_slope_max)
        checks["grad_slope"] = _slope_ok(table, "grad_gap", section.grad_slope_max)
    floor = None
    if section.shift != 0.0:
        floor = table.rows[-1].traj_error / section.shift**2

    passed = all(checks.values())
    windows = _slope_windows(table, section)
    summary = [
        f"slope {name}: {w['slope']:.3f}, window [{w['window'][0]}, {w['window'][1]}]"
        f" (margin {w['margin']:+.3f})"
        for name, w in windows.items()
        if w["slope"] is not None
    ]
    summary += [f"{name}: {'ok' if ok else 'FAILED'}" for name, ok in checks.items()]
    if floor is not None:
        summary.append(f"traj_error / delta^2 at N={table.rows[-1].N}: {floor:.3f}")
    report = {"slopes": slopes, "slope_windows": windows, "checks": checks, "per_N": extras, "K_N": K,
              "q": None if math.isinf(q) else q, "shift_floor_ratio": floor, "mfg_determinant": mean_field.determinant}
    return finish(config, digest, directory, passed, report, summary, result=table)
