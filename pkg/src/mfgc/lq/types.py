from enum import Enum
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class GameMode(str, Enum):
    """Which game an LQ parameter set describes."""
    NPLAYER = "nplayer"
    MEAN_FIELD = "mean_field"


class DegeneracyClass(str, Enum):
    REGULAR = "Regular"
    NO_QUADRATIC_SOLUTION = "NoQuadraticSolution"
    NON_UNIQUE_FAMILY = "NonUniqueFamily"
    INCONSISTENT_SYSTEM = "InconsistentSystem"


class LqParams(BaseModel):
    """Data of the one-dimensional LQ game with control and terminal coupling."""
    model_config = ConfigDict(frozen=True)

    kappa: float = Field(..., description="Control-coupling weight.")
    rho: float = Field(0.0, description="Terminal-coupling weight.")
    gamma: float = Field(..., ge=0, description="Control-cost weight; gamma = 0 leaves L convex with constant 1.")
    horizon: float = Field(1.0, gt=0, description="Time horizon T.")
    n_players: Optional[int] = Field(None, ge=2, description="Number of players (N-player mode).")
    initial_positions: Optional[Tuple[float, ...]] = Field(
        None, description="Dirac initial positions z^i, one per player (N-player mode)."
    )
    gaussian_init: Optional[Tuple[float, float]] = Field(
        None, description="(mean mu(0), inverse width s(0)) of the Gaussian initial law (MFG mode)."
    )
    beta: float = Field(0.0, ge=0, description="Noise level.")

    @model_validator(mode="before")
    @classmethod
    def _default_player_count(cls, data):
        if isinstance(data, dict) and data.get("initial_positions") is not None:
            data = dict(data)
            if data.get("n_players") is None:
                data["n_players"] = len(data["initial_positions"])
        return data

    @model_validator(mode="after")
    def _check_invariants(self) -> "LqParams":
        if self.kappa == 0:
            raise ValueError("kappa must be nonzero")
        if self.gaussian_init is not None and not self.gaussian_init[1] > 0:
            raise ValueError("gaussian_init inverse width s(0) must be positive")
        if self.initial_positions is not None and self.n_players != len(self.initial_positions):
            raise ValueError(
                f"n_players={self.n_players} but {len(self.initial_positions)} initial positions were given"
            )
        return self

    @property
    def mode(self) -> GameMode:
        return GameMode.NPLAYER if self.n_players is not None else GameMode.MEAN_FIELD

    @property
    def lam(self) -> float:
        """Convexity constant 1+gamma of the running cost in the control."""
        return 1.0 + self.gamma

    @property
    def mu0(self) -> float:
        return self.gaussian_init[0] if self.gaussian_init is not None else 0.0

    @property
    def s0(self) -> float:
        return self.gaussian_init[1] if self.gaussian_init is not None else 1.0

    @property
    def semimon_condition(self) -> float:
        """1+kappa+gamma+T(1+rho); its sign decides mean-field semimonotonicity."""
        return 1.0 + self.kappa + self.gamma + self.horizon * (1.0 + self.rho)


class DegeneracyReport(BaseModel):
    """Outcome of classify_degeneracy."""
    classification: DegeneracyClass
    violated_condition: Optional[str] = Field(None, description="Label of the violated condition.")
    determinant: float = Field(..., description="Determinant of the MFG (B, D) system.")

    @property
    def regular(self) -> bool:
        return self.classification == DegeneracyClass.REGULAR


class SemimonReport(BaseModel):
    """Displacement semimonotonicity constants of the LQ costs."""
    mode: GameMode
    C_La: float
    C_Lx: float
    C_g: float
    C_disp: float
    contraction_margin: float = Field(..., description="1 - |kappa|/(1+gamma).")
    semimonotone: bool
    contractive: bool
    condition_value: float = Field(..., description="1+kappa+gamma+T(1+rho).")
    # Same constants recomputed as extreme eigenvalues of the monotonicity forms
    C_La_eigen: float
    C_g_eigen: float
    C_disp_eigen: float

    @property
    def printed_matches_eigen(self) -> bool:
        scale = max(1.0, abs(self.C_La), abs(self.C_g))
        return (
            abs(self.C_La - self.C_La_eigen) <= 1e-10 * scale
            and abs(self.C_g - self.C_g_eigen) <= 1e-10 * scale
        )
