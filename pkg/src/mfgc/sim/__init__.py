from mfgc.sim.deviation import (
    DeviationReport,
    DeviationResult,
    Perturbation,
    Verdict,
    constant_shift,
    default_perturbations,
    deviation_test,
    gain_scaling,
    quadratic_fit,
    time_bump,
)
from mfgc.sim.paths import (
    CostEstimate,
    FeedbackSet,
    PathEnsemble,
    SimConfig,
    estimate_cost,
    noise_block,
    pathwise_costs,
    simulate,
    write_cost_summary,
)

__all__ = [
    "CostEstimate",
    "DeviationReport",
    "DeviationResult",
    "FeedbackSet",
    "PathEnsemble",
    "Perturbation",
    "SimConfig",
    "Verdict",
    "constant_shift",
    "default_perturbations",
    "deviation_test",
    "estimate_cost",
    "gain_scaling",
    "noise_block",
    "pathwise_costs",
    "quadratic_fit",
    "simulate",
    "time_bump",
    "write_cost_summary",
]
