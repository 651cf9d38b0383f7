"""
Deviation verification: unilateral deviations from a computed equilibrium,
and from a deliberately corrupted copy of it, at each configured noise level.
"""

import logging
from typing import Dict, List, Optional, Tuple

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
    run_cells,
    sim_config,
    solver_config,
    write_table,
)
from mfgc.lq import solve_nplayer_lq
from mfgc.schemas import ExperimentConfig
from mfgc.sim import DeviationReport, FeedbackSet, constant_shift, deviation_test
from mfgc.solvers import solve_nplayer_deterministic
from mfgc.utils.logger import Logger

logger = logging.getLogger(__name__)

VARIANTS = ("equilibrium", "corrupted")
COLUMNS = ("beta", "feedback", "player", "perturbation", "family", "epsilon", "delta_J", "stderr", "verdict")


def equilibrium_feedbacks(config: ExperimentConfig, z) -> FeedbackSet:
    """Closed-form feedbacks for the LQ model, nearest-trajectory fields from a Picard solve otherwise."""
    grid = make_grid(config)
    if config.model.name == "lq":
        return FeedbackSet.from_lq(solve_nplayer_lq(lq_params(config, initial_positions=tuple(z)), grid))
    bundle, _ = solve_nplayer_deterministic(make_model(config.model), z, grid, solver_config(config))
    return FeedbackSet.nearest(bundle)


def run_deviation_verify(config: ExperimentConfig, log: Optional[Logger] = None) -> ExperimentOutcome:
    """Every equilibrium deviation must PASS; every corrupted feedback must be refuted."""
    log = log or Logger(quiet=True)
    section = config.deviation_verify
    digest = config_hash(config)
    directory = output_dir(config, digest)
    log.log_header(f"deviation-verify [{digest}]")

    z = draw_initial(config, cell_rng(config.seed, 0), config.n_players)
    model = make_model(config.model)
    with log.progress("Computing equilibrium feedbacks..."):
        equilibrium = equilibrium_feedbacks(config, z)

    variants = [0, 1] if section.corrupt_shift != 0.0 else [0]
    keys = [(b, player, v) for b in range(len(section.betas)) for player in section.players for v in variants]

    def cell(key: Tuple[int, int, int]) -> DeviationReport:
        b, player, variant = key
        beta = section.betas[b]
        label = f"beta={beta:g} player={player} {VARIANTS[variant]}"
        log.log_cell_start(label)
        feedbacks = equilibrium
        if variant == 1:
            corrupt = constant_shift(section.corrupt_shift)
            feedbacks = equilibrium.replaced(player, corrupt.apply(equilibrium.feedbacks[player]))
        report = deviation_test(feedbacks, model, player, None, sim_config(config, beta), z)
        log.log_cell_done(label, "passed" if report.passed else "refuted", ok=report.passed == (variant == 0))
        return report

    rows: List[Dict] = []
    outcomes = []
    for (b, player, variant), report in run_cells(cell, keys, config.threads):
        beta = section.betas[b]
        for row in report.to_rows():
            rows.append({"beta": beta, "feedback": VARIANTS[variant], **row})
        outcomes.append({
            "beta": beta,
            "player": player,
            "feedback": VARIANTS[variant],
            "passed": report.passed,
            "baseline_J": report.baseline.mean,
            "baseline_stderr": report.baseline.stderr,
            "quadratic_fits": report.quadratic_fits,
        })

    write_table(directory / TABLE_NAME, COLUMNS, rows, digest)
    (directory / PLOT_NAME).write_text("\n".join([
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set title 'deviation-verify: cost change of constant shifts'",
        "set xlabel 'epsilon'",
        "set ylabel 'delta J'",
        f"plot '{TABLE_NAME}' using (strcol('family') eq 'shift' && strcol('feedback') eq 'equilibrium' "
        "? column('epsilon') : NaN):(column('delta_J')):(column('stderr')) with yerrorbars title 'equilibrium', \\",
        f"     '{TABLE_NAME}' using (strcol('family') eq 'shift' && strcol('feedback') eq 'corrupted' "
        "? column('epsilon') : NaN):(column('delta_J')):(column('stderr')) with yerrorbars title 'corrupted'",
    ]) + "\n")

    failures = [o for o in outcomes if o["passed"] != (o["feedback"] == "equilibrium")]
    passed = not failures
    summary = [
        f"beta={o['beta']:g} player={o['player']} {o['feedback']}: {'PASS' if o['passed'] else 'refuted'}"
        for o in outcomes
    ]
    return finish(config, digest, directory, passed, {"runs": outcomes}, summary)
