from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from mfgc.config import OUTPUT_DIR, THREADS
from mfgc.game.model import get_available_models

ExperimentId = Literal[
    "oracle-check",
    "n-sweep",
    "degeneracy-map",
    "viscosity-sweep",
    "deviation-verify",
    "stability-probe",
]

LQ_ONLY = ("oracle-check", "n-sweep", "degeneracy-map", "viscosity-sweep")


class Section(BaseModel):
    """Base for every config block: unknown keys and non-finite numbers are rejected."""
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)


class ModelSpec(Section):
    """A registered cost model and its factory parameters."""
    name: str = Field("lq", description="Registry key of the cost model.")
    params: Dict[str, float] = Field(
        default_factory=lambda: {"kappa": 0.5, "gamma": 1.0, "rho": 0.0},
        description="Keyword arguments of the model factory.",
    )

    @field_validator("name")
    @classmethod
    def _registered(cls, name: str) -> str:
        import mfgc.game.builtin  # noqa: F401

        if name not in get_available_models():
            raise ValueError(f"unknown model '{name}', available: {get_available_models()}")
        return name


class GridSpec(Section):
    """Uniform time grid with M steps on [0, T]."""
    steps: int = Field(1000, ge=2, description="Number of time steps M.")
    horizon: float = Field(1.0, gt=0, description="Time horizon T.")


class InitSpec(Section):
    """Initial law m_0 of the players."""
    law: Literal["gaussian", "uniform", "dirac"] = Field(
        "gaussian", description="gaussian: N(mu0, 1/(2 s0^2)); uniform: mu0 +- half_width; dirac: positions."
    )
    mu0: float = Field(0.0, description="Mean of m_0.")
    s0: float = Field(1.0, gt=0, description="Inverse width of the Gaussian m_0.")
    half_width: float = Field(1.0, gt=0, description="Half width of the uniform m_0.")
    positions: Optional[List[float]] = Field(None, description="Explicit Dirac positions.")

    @model_validator(mode="after")
    def _positions_for_dirac(self) -> "InitSpec":
        if self.law == "dirac" and not self.positions:
            raise ValueError("law 'dirac' needs positions")
        return self


class SolverSpec(Section):
    """Picard solver settings."""
    outer_tol: float = Field(1e-8, gt=0)
    max_outer_iters: int = Field(500, ge=1)
    inner_tol: Optional[float] = Field(None, gt=0, description="Defaults to outer_tol/100.")


class SimSpec(Section):
    """Monte Carlo settings shared by the stochastic experiments."""
    n_paths: int = Field(10_000, ge=2)
    dt: float = Field(1e-3, gt=0)
    antithetic: bool = False


####################################
# Per-experiment sections
####################################

class OracleCheckSection(Section):
    n_particles: int = Field(1000, ge=1, description="Particles of the mean-field Picard run.")
    mfg_sigmas: float = Field(3.0, gt=0, description="Width of the Monte Carlo band for the mean path.")
    order_model: ModelSpec = Field(
        default_factory=lambda: ModelSpec(
            name="quadratic-plus-potential",
            params={"control_weight": 1.0, "curvature": 0.5, "coupling": 0.3, "potential": 1.0},
        ),
        description="Model for the integrator-order check; LQ controls are constant in time.",
    )
    order_steps: List[int] = Field([20, 40, 80, 160], description="Grid sizes, each doubling the last.")
    order_band: Tuple[float, float] = Field((3.2, 4.8), description="Accepted error ratio per halving of dt.")

    @field_validator("order_steps")
    @classmethod
    def _doubling(cls, steps: List[int]) -> List[int]:
        if len(steps) < 3 or any(b != 2 * a for a, b in zip(steps, steps[1:])):
            raise ValueError("order_steps needs at least three entries, each twice the previous")
        return steps


class NSweepSection(Section):
    n_list: List[int] = Field([10, 32, 100, 316, 1000], description="Player counts, strictly increasing.")
    replicates: int = Field(10, ge=1, description="Seed replicates per N.")
    shift: float = Field(0.0, description="Offset delta of the players' initial law from m_0.")
    q: Optional[float] = Field(None, gt=2, description="Moment order for r_{d,q}; None means moments of every order.")
    reference_samples: int = Field(4000, ge=10, description="Sample size representing m_0 in K(N).")
    widen: float = Field(3.0, gt=0, description="Evaluation box as a multiple of the trajectory envelope.")
    epsilon: float = Field(0.1, gt=0, description="Deviation level of the reported concentration bound.")
    bound_constant: float = Field(1.0, gt=0, description="Constant C in front of K(N) + r(N).")
    traj_slope_max: float = Field(-0.35, description="Pass when the trajectory slope is at or below this.")
    value_slope_max: float = Field(-0.15, description="Pass when the value-gap slope is at or below this.")
    grad_slope_max: float = Field(-0.15, description="Pass when the gradient-gap slope is at or below this.")
    traj_slope_min: float = Field(-0.65, description="Lower edge of the reported trajectory slope window.")
    value_slope_min: float = Field(-0.35, description="Lower edge of the reported value-gap slope window.")
    grad_slope_min: float = Field(-0.35, description="Lower edge of the reported gradient-gap slope window.")

    @field_validator("n_list")
    @classmethod
    def _increasing(cls, n_list: List[int]) -> List[int]:
        if not n_list:
            raise ValueError("n_list must not be empty")
        if n_list[0] < 2 or any(b <= a for a, b in zip(n_list, n_list[1:])):
            raise ValueError("n_list must be strictly increasing with entries >= 2")
        return n_list


class AxisSpec(Section):
    start: float
    stop: float
    count: int = Field(41, ge=1)

    def values(self) -> List[float]:
        if self.count == 1:
            return [self.start]
        step = (self.stop - self.start) / (self.count - 1)
        return [self.start + k * step for k in range(self.count)]


class DegeneracyMapSection(Section):
    kappa: AxisSpec = Field(default_factory=lambda: AxisSpec(start=-4.0, stop=4.0))
    rho: AxisSpec = Field(default_factory=lambda: AxisSpec(start=-4.0, stop=4.0))
    picard: bool = Field(True, description="Attempt a capped particle Picard solve per cell.")
    picard_particles: int = Field(8, ge=1)
    picard_steps: int = Field(40, ge=2)
    picard_max_iters: int = Field(100, ge=1)


class ViscositySweepSection(Section):
    betas: List[float] = Field([1.0, 0.1, 0.01, 0.0], description="Noise levels, descending to 0.")
    deviation: bool = Field(True, description="Run the deviation test at every noise level.")
    min_r2: float = Field(0.99, gt=0, le=1)

    @field_validator("betas")
    @classmethod
    def _descending(cls, betas: List[float]) -> List[float]:
        if not betas or any(b < 0 for b in betas):
            raise ValueError("betas must be a nonempty list of nonnegative values")
        if any(b >= a for a, b in zip(betas, betas[1:])):
            raise ValueError("betas must be strictly descending")
        return betas


class DeviationVerifySection(Section):
    betas: List[float] = Field([0.0, 0.5])
    players: List[int] = Field([0], description="Deviating players.")
    corrupt_shift: float = Field(0.5, description="Shift of C_i in the corrupted feedback; 0 skips that run.")

    @field_validator("betas")
    @classmethod
    def _nonnegative(cls, betas: List[float]) -> List[float]:
        if not betas or any(b < 0 for b in betas):
            raise ValueError("betas must be a nonempty list of nonnegative values")
        return betas


class StabilityProbeSection(Section):
    epsilons: List[float] = Field([1e-2, 1e-3, 1e-4])
    random_trials: int = Field(0, ge=0, description="Extra random perturbation directions per epsilon.")
    max_ratio: Optional[float] = Field(None, gt=0, description="Declared stability constant, checked when set.")
    spread_tol: float = Field(0.01, gt=0, description="Relative spread of the LQ ratios across epsilons.")


####################################
# Experiment config
####################################

class ExperimentConfig(Section):
    """One experiment run, validated before any computation."""
    experiment: ExperimentId
    seed: int = Field(0, ge=0)
    out: str = Field(OUTPUT_DIR, description="Output root; results go to <out>/<experiment>/<hash>/.")
    threads: int = Field(THREADS, ge=1, description="Worker pool size for experiment cells.")
    model: ModelSpec = Field(default_factory=ModelSpec)
    grid: GridSpec = Field(default_factory=GridSpec)
    init: InitSpec = Field(default_factory=InitSpec)
    n_players: int = Field(4, ge=2)
    solver: SolverSpec = Field(default_factory=SolverSpec)
    sim: SimSpec = Field(default_factory=SimSpec)
    oracle_tol: float = Field(1e-5, gt=0, description="Sup error accepted against the LQ oracle.")

    oracle_check: OracleCheckSection = Field(default_factory=OracleCheckSection)
    n_sweep: NSweepSection = Field(default_factory=NSweepSection)
    degeneracy_map: DegeneracyMapSection = Field(default_factory=DegeneracyMapSection)
    viscosity_sweep: ViscositySweepSection = Field(default_factory=ViscositySweepSection)
    deviation_verify: DeviationVerifySection = Field(default_factory=DeviationVerifySection)
    stability_probe: StabilityProbeSection = Field(default_factory=StabilityProbeSection)

    @model_validator(mode="after")
    def _model_fits_experiment(self) -> "ExperimentConfig":
        if self.experiment in LQ_ONLY and self.model.name != "lq":
            raise ValueError(f"experiment '{self.experiment}' needs the 'lq' model, got '{self.model.name}'")
        if self.model.name == "lq":
            missing = {"kappa", "gamma"} - set(self.model.params)
            if missing:
                raise ValueError(f"lq model needs parameters {sorted(missing)}")
        if self.init.law == "dirac" and self.init.positions and len(self.init.positions) != self.n_players:
            if self.experiment in ("oracle-check", "viscosity-sweep", "deviation-verify", "stability-probe"):
                raise ValueError(
                    f"{len(self.init.positions)} positions given for n_players={self.n_players}"
                )
        if self.experiment == "deviation-verify":
            bad = [p for p in self.deviation_verify.players if not 0 <= p < self.n_players]
            if bad:
                raise ValueError(f"deviating players {bad} out of range for n_players={self.n_players}")
        return self

    def fingerprint(self) -> dict:
        """Everything that determines the results: out and threads are excluded."""
        return self.model_dump(mode="json", exclude={"out", "threads"})
