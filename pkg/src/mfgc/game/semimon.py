"""Monte Carlo probe of declared displacement semimonotonicity constants."""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from mfgc.game.model import CostModel, PopulationView
from mfgc.lq.types import GameMode

PairSample = Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
Sampler = Callable[[np.random.Generator], PairSample]


@dataclass(frozen=True)
class SemimonGaps:
    """Gap = monotonicity form minus its declared lower bound; negative means falsified."""
    trials: int
    min_L_gap: float
    mean_L_gap: float
    min_g_gap: float
    mean_g_gap: float

    @property
    def falsified(self) -> bool:
        return min(self.min_L_gap, self.min_g_gap) < 0


def gaussian_pair_sampler(size: int, scale: float = 1.0) -> Sampler:
    """Independent N(0, scale^2) draws for x, a, x_bar, a_bar, each of length `size`."""

    def sample(rng: np.random.Generator) -> PairSample:
        x, a, x_bar, a_bar = rng.normal(scale=scale, size=(4, size))
        return x, a, x_bar, a_bar

    return sample


def semimon_probe(
    model: CostModel,
    trials: int,
    sampler: Sampler,
    mode: GameMode,
    C_La: float,
    C_Lx: float,
    C_g: float,
    seed: Optional[int] = 0,
) -> SemimonGaps:
    """
    Evaluate the semimonotonicity inequalities at random pairs.

    N-player mode sums over the players (each sees the others); mean-field mode
    averages over the batch, which plays the role of the L^2 random variables,
    and every sample sees the whole batch.
    """
    rng = np.random.default_rng(seed)
    include_self = mode == GameMode.MEAN_FIELD
    reduce = np.mean if include_self else np.sum

    L_gaps = np.empty(trials)
    g_gaps = np.empty(trials)
    for k in range(trials):
        x, a, x_bar, a_bar = (np.asarray(v, dtype=float) for v in sampler(rng))
        ctx = PopulationView(x, a, include_self=include_self)
        ctx_bar = PopulationView(x_bar, a_bar, include_self=include_self)
        da, dx = a - a_bar, x - x_bar

        lhs_L = reduce(
            (model.grad_a(x, a, ctx) - model.grad_a(x_bar, a_bar, ctx_bar)) * da
            + (model.grad_x(x, a, ctx) - model.grad_x(x_bar, a_bar, ctx_bar)) * dx
        )
        lhs_g = reduce((model.grad_terminal(x, ctx) - model.grad_terminal(x_bar, ctx_bar)) * dx)

        L_gaps[k] = lhs_L - C_La * reduce(da**2) + C_Lx * reduce(dx**2)
        g_gaps[k] = lhs_g + C_g * reduce(dx**2)

    return SemimonGaps(
        trials=trials,
        min_L_gap=float(L_gaps.min()),
        mean_L_gap=float(L_gaps.mean()),
        min_g_gap=float(g_gaps.min()),
        mean_g_gap=float(g_gaps.mean()),
    )
