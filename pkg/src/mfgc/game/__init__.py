from mfgc.game.builtin import lq_model, lq_model_from_params, quadratic_plus_potential_model
from mfgc.game.consistency import (
    FixedPointConfig,
    FixedPointResult,
    consistency_fixed_point_mf,
    consistency_fixed_point_nplayer,
)
from mfgc.game.legendre import hamiltonian_value, legendre_argmax
from mfgc.game.model import (
    CostModel,
    EmpiricalPairMeasure,
    OtherPlayers,
    PopulationView,
    build_model,
    get_available_models,
    gradient_audit,
)
from mfgc.game.semimon import SemimonGaps, gaussian_pair_sampler, semimon_probe

__all__ = [
    "CostModel",
    "EmpiricalPairMeasure",
    "FixedPointConfig",
    "FixedPointResult",
    "OtherPlayers",
    "PopulationView",
    "SemimonGaps",
    "build_model",
    "consistency_fixed_point_mf",
    "consistency_fixed_point_nplayer",
    "gaussian_pair_sampler",
    "get_available_models",
    "gradient_audit",
    "hamiltonian_value",
    "legendre_argmax",
    "lq_model",
    "lq_model_from_params",
    "quadratic_plus_potential_model",
    "semimon_probe",
]
