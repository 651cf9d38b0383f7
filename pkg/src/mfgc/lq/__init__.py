from mfgc.lq.oracle import (
    LqEvaluation,
    LqMfgSolution,
    LqNPlayerSolution,
    classify_degeneracy,
    eval_lq,
    lq_hamiltonian,
    riccati_r,
    solve_mfg_lq,
    solve_nplayer_lq,
    write_solution_csv,
)
from mfgc.lq.semimon import semimon_constants
from mfgc.lq.types import DegeneracyClass, DegeneracyReport, GameMode, LqParams, SemimonReport

__all__ = [
    "DegeneracyClass",
    "DegeneracyReport",
    "GameMode",
    "LqEvaluation",
    "LqMfgSolution",
    "LqNPlayerSolution",
    "LqParams",
    "SemimonReport",
    "classify_degeneracy",
    "eval_lq",
    "lq_hamiltonian",
    "riccati_r",
    "semimon_constants",
    "solve_mfg_lq",
    "solve_nplayer_lq",
    "write_solution_csv",
]
