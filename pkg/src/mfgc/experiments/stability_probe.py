"""
Stability probe: empirical Lipschitz constant of the equilibrium flow with
respect to the initial positions, for shrinking perturbation sizes.
"""

import logging
from typing import Dict, Optional, Tuple

import numpy as np

from mfgc.experiments.common import (
    PLOT_NAME,
    TABLE_NAME,
    ExperimentOutcome,
    cell_rng,
    config_hash,
    draw_initial,
    finish,
    make_grid,
    make_model,
    output_dir,
    run_cells,
    solver_config,
    write_table,
)
from mfgc.schemas import ExperimentConfig
from mfgc.solvers import stability_probe
from mfgc.utils.logger import Logger

logger = logging.getLogger(__name__)

COLUMNS = ("epsilon", "trial", "ratio", "numerator", "denominator", "degenerate", "outer_iterations")


def directions(n_players: int, trials: int, seed: int) -> np.ndarray:
    """Row 0 moves the first player only; further rows are random with unit l1 norm."""
    rows = [np.eye(n_players)[0]]
    rng = cell_rng(seed, 1)
    for _ in range(trials):
        d = rng.standard_normal(n_players)
        rows.append(d / np.sum(np.abs(d)))
    return np.array(rows)


def run_stability_probe(config: ExperimentConfig, log: Optional[Logger] = None) -> ExperimentOutcome:
    """
    Ratios sup_t sum_i |X^a_i - X^b_i| / sum_i |z^a_i - z^b_i| for every
    (epsilon, direction). The LQ flow is affine in the initial data, so there
    the ratios must agree across epsilons up to spread_tol.
    """
    log = log or Logger(quiet=True)
    section = config.stability_probe
    digest = config_hash(config)
    directory = output_dir(config, digest)
    log.log_header(f"stability-probe [{digest}]")

    grid = make_grid(config)
    model = make_model(config.model)
    z = draw_initial(config, cell_rng(config.seed, 0), config.n_players)
    D = directions(config.n_players, section.random_trials, config.seed)
    keys = [(e, trial) for e in range(len(section.epsilons)) for trial in range(D.shape[0])]

    def cell(key: Tuple[int, int]) -> Dict:
        e, trial = key
        eps = section.epsilons[e]
        result = stability_probe(model, z, z + eps * D[trial], grid, solver_config(config))
        log.log_cell_done(f"epsilon={eps:g} trial={trial}", f"ratio={result.ratio:.6g}")
        return {
            "epsilon": eps,
            "trial": trial,
            "ratio": result.ratio,
            "numerator": result.numerator,
            "denominator": result.denominator,
            "degenerate": result.degenerate,
            "outer_iterations": result.report_b.outer_iterations if result.report_b else None,
        }

    with log.progress(f"Solving {2 * len(keys)} perturbed problems..."):
        rows = [row for _, row in run_cells(cell, keys, config.threads)]
    write_table(directory / TABLE_NAME, COLUMNS, rows, digest)
    (directory / PLOT_NAME).write_text("\n".join([
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set title 'stability-probe: ratio against epsilon'",
        "set xlabel 'epsilon'",
        "set ylabel 'ratio'",
        "set logscale x",
        f"plot '{TABLE_NAME}' using (column('epsilon')):(column('ratio')) with points pt 7 title 'ratio'",
    ]) + "\n")

    spreads = {}
    for trial in range(D.shape[0]):
        ratios = np.array([row["ratio"] for row in rows if row["trial"] == trial and not row["degenerate"]])
        if ratios.size >= 2 and np.mean(ratios) > 0:
            spreads[trial] = float((ratios.max() - ratios.min()) / np.mean(ratios))

    checks = {}
    if config.model.name == "lq" and spreads:
        checks["ratio_constant_across_epsilon"] = max(spreads.values()) <= section.spread_tol
    if section.max_ratio is not None:
        checks["ratio_below_declared_constant"] = max(row["ratio"] for row in rows) <= section.max_ratio

    passed = all(checks.values())
    max_ratio = max(row["ratio"] for row in rows)
    summary = [f"max ratio {max_ratio:.6g}"]
    summary += [f"trial {trial}: relative spread {s:.2e}" for trial, s in spreads.items()]
    summary += [f"{name}: {'ok' if ok else 'FAILED'}" for name, ok in checks.items()]
    report = {"checks": checks, "spreads": spreads, "max_ratio": max_ratio}
    return finish(config, digest, directory, passed, report, summary)
