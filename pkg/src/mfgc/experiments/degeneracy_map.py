"""
Degeneracy map of the mean-field LQ game over a (kappa, rho) grid.

Each cell is classified, gets its semimonotonicity constants and, when
regular, an oracle solve; a capped particle Picard attempt is recorded as
data and never fails the run.
"""

import logging
from typing import Dict, Optional, Tuple

from mfgc.errors import MfgcError
from mfgc.experiments.common import (
    PLOT_NAME,
    TABLE_NAME,
    ExperimentOutcome,
    config_hash,
    finish,
    lq_params,
    output_dir,
    run_cells,
    write_table,
)
from mfgc.game.builtin import lq_model_from_params
from mfgc.grid import TimeGrid
from mfgc.lq import DegeneracyClass, GameMode, classify_degeneracy, semimon_constants, solve_mfg_lq
from mfgc.schemas import ExperimentConfig
from mfgc.solvers import SolverConfig, gaussian_initial_sampler, solve_mfg_particles
from mfgc.utils.logger import Logger

logger = logging.getLogger(__name__)

LABEL_CODES = {
    "Regular": 0,
    "contraction-fail": 1,
    "semimonotone-fail": 2,
    "degenerate": 3,
    "excluded": 4,
}
ORACLE_RESIDUAL_TOL = 1e-8

COLUMNS = (
    "kappa", "rho", "label", "code", "classification", "contractive", "semimonotone",
    "condition_value", "C_disp", "oracle_solved", "oracle_residual",
    "picard", "picard_iterations", "contraction_factor",
)


def _picard_attempt(config: ExperimentConfig, params) -> Dict:
    section = config.degeneracy_map
    solver = SolverConfig(
        outer_tol=config.solver.outer_tol,
        max_outer_iters=section.picard_max_iters,
        raise_on_failure=False,
    )
    try:
        _, report = solve_mfg_particles(
            lq_model_from_params(params),
            gaussian_initial_sampler(config.init.mu0, config.init.s0),
            section.picard_particles,
            TimeGrid(params.horizon, section.picard_steps),
            solver,
            seed=config.seed,
        )
    except MfgcError as e:
        logger.debug("Picard attempt raised at kappa=%g rho=%g: %s", params.kappa, params.rho, e)
        return {"picard": "error", "picard_iterations": None, "contraction_factor": None}
    status = "converged" if report.converged else ("non-contractive" if report.degeneracy_flag else "capped")
    return {
        "picard": status,
        "picard_iterations": report.outer_iterations,
        "contraction_factor": report.contraction_factor,
    }


def _cell(config: ExperimentConfig, kappa: float, rho: float) -> Dict:
    row = {"kappa": kappa, "rho": rho}
    if abs(kappa) <= 1e-12:
        # kappa = 0 decouples the game and the (B, D) parametrization breaks down
        row.update(label="excluded", code=LABEL_CODES["excluded"], picard="skipped")
        return row

    params = lq_params(config, kappa=kappa, rho=rho)
    report = classify_degeneracy(params, GameMode.MEAN_FIELD)
    constants = semimon_constants(params, GameMode.MEAN_FIELD)
    row.update(
        classification=report.classification.value,
        contractive=constants.contractive,
        semimonotone=constants.semimonotone,
        condition_value=constants.condition_value,
        C_disp=constants.C_disp,
    )

    if report.regular:
        try:
            solution = solve_mfg_lq(params)
            residual = solution.boundary_residual()
            scale = max(1.0, abs(solution.B), abs(solution.D))
            row.update(oracle_solved=residual <= ORACLE_RESIDUAL_TOL * scale, oracle_residual=residual)
        except MfgcError as e:
            logger.warning("Oracle failed on a regular cell kappa=%g rho=%g: %s", kappa, rho, e)
            row.update(oracle_solved=False)

    if not report.regular:
        label = "degenerate"
    elif not constants.contractive:
        label = "contraction-fail"
    elif not constants.semimonotone:
        label = "semimonotone-fail"
    else:
        label = "Regular"
    row.update(label=label, code=LABEL_CODES[label])

    if config.degeneracy_map.picard:
        row.update(_picard_attempt(config, params))
    else:
        row.update(picard="skipped")
    return row


def _plot_script() -> str:
    tics = ", ".join(f"'{name}' {code}" for name, code in LABEL_CODES.items())
    return "\n".join([
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set title 'degeneracy map'",
        "set xlabel 'kappa'",
        "set ylabel 'rho'",
        f"set cbrange [0:{max(LABEL_CODES.values())}]",
        f"set cbtics ({tics})",
        f"set palette maxcolors {len(LABEL_CODES)}",
        f"plot '{TABLE_NAME}' using (column('kappa')):(column('rho')):(column('code')) "
        "with points pt 5 ps 1.5 palette notitle",
    ]) + "\n"


def run_degeneracy_map(config: ExperimentConfig, log: Optional[Logger] = None) -> ExperimentOutcome:
    """Label every (kappa, rho) cell; fails only when a regular cell cannot be solved by the oracle."""
    log = log or Logger(quiet=True)
    section = config.degeneracy_map
    digest = config_hash(config)
    directory = output_dir(config, digest)
    log.log_header(f"degeneracy-map [{digest}]")

    kappas = section.kappa.values()
    rhos = section.rho.values()

    def cell(key: Tuple[int, int]) -> Dict:
        i, j = key
        return _cell(config, kappas[i], rhos[j])

    keys = [(i, j) for i in range(len(kappas)) for j in range(len(rhos))]
    with log.progress(f"Classifying {len(keys)} cells..."):
        rows = [row for _, row in run_cells(cell, keys, config.threads)]
    write_table(directory / TABLE_NAME, COLUMNS, rows, digest)
    (directory / PLOT_NAME).write_text(_plot_script())

    counts = {label: sum(row["label"] == label for row in rows) for label in LABEL_CODES}
    classes = {cls.value: sum(row.get("classification") == cls.value for row in rows) for cls in DegeneracyClass}
    unsolved = [
        (row["kappa"], row["rho"]) for row in rows
        if row.get("classification") == DegeneracyClass.REGULAR.value and not row.get("oracle_solved")
    ]
    passed = not unsolved
    summary = [f"{label}: {count}" for label, count in counts.items()]
    if unsolved:
        summary.append(f"regular cells the oracle failed on: {len(unsolved)}")
    report = {"labels": counts, "classifications": classes, "unsolved_regular_cells": unsolved}
    return finish(config, digest, directory, passed, report, summary)
