from mfgc.metrics.convergence import (
    ConvergenceGap,
    RateRow,
    RateTable,
    empirical_convergence_error,
    fit_loglog_slope,
    observed_order,
    write_gnuplot_script,
)
from mfgc.metrics.rates import TailParams, concentration_bound, fournier_guillin_rate, initial_mismatch_K
from mfgc.metrics.wasserstein import w2, w2_1d, w2_exact_small

__all__ = [
    "ConvergenceGap",
    "RateRow",
    "RateTable",
    "TailParams",
    "concentration_bound",
    "empirical_convergence_error",
    "fit_loglog_slope",
    "fournier_guillin_rate",
    "initial_mismatch_K",
    "observed_order",
    "w2",
    "w2_1d",
    "w2_exact_small",
    "write_gnuplot_script",
]
