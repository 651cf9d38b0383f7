"""
Experiment registry.

Each experiment id maps to a runner taking (ExperimentConfig, Logger) and
returning an ExperimentOutcome; the CLI dispatches through EXPERIMENTS.
"""

from typing import Callable, Dict, List, Optional

from mfgc.experiments.common import ExperimentOutcome, load_config
from mfgc.experiments.degeneracy_map import run_degeneracy_map
from mfgc.experiments.deviation_verify import run_deviation_verify
from mfgc.experiments.n_sweep import run_n_sweep
from mfgc.experiments.oracle_check import run_oracle_check
from mfgc.experiments.stability_probe import run_stability_probe
from mfgc.experiments.viscosity_sweep import run_viscosity_sweep
from mfgc.schemas import ExperimentConfig
from mfgc.utils.logger import Logger

Runner = Callable[[ExperimentConfig, Optional[Logger]], ExperimentOutcome]

EXPERIMENTS: Dict[str, Runner] = {
    "oracle-check": run_oracle_check,
    "n-sweep": run_n_sweep,
    "degeneracy-map": run_degeneracy_map,
    "viscosity-sweep": run_viscosity_sweep,
    "deviation-verify": run_deviation_verify,
    "stability-probe": run_stability_probe,
}


def get_available_experiments() -> List[str]:
    return list(EXPERIMENTS.keys())


def run_experiment(config: ExperimentConfig, log: Optional[Logger] = None) -> ExperimentOutcome:
    """Dispatch config.experiment to its runner."""
    return EXPERIMENTS[config.experiment](config, log)


__all__ = [
    "EXPERIMENTS",
    "ExperimentOutcome",
    "get_available_experiments",
    "load_config",
    "run_experiment",
]
