from mfgc.solvers.bundle import BundleMode, Defects, SolveReport, StabilityResult, TrajectoryBundle
from mfgc.solvers.fbode import (
    SolverConfig,
    dirac_sampler,
    gaussian_initial_sampler,
    integrate_backward,
    integrate_forward,
    residuals,
    solve_mfg_particles,
    solve_nplayer_deterministic,
    stability_probe,
)

__all__ = [
    "BundleMode",
    "Defects",
    "SolveReport",
    "SolverConfig",
    "StabilityResult",
    "TrajectoryBundle",
    "dirac_sampler",
    "gaussian_initial_sampler",
    "integrate_backward",
    "integrate_forward",
    "residuals",
    "solve_mfg_particles",
    "solve_nplayer_deterministic",
    "stability_probe",
]
