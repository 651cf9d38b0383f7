"""
Control-consistency fixed points.

Given states and costates for a whole population, find controls a with
a_k = argmax_a [-p_k a - L(x_k, a, population(x, a))] for every entity k.
The N-player map excludes the entity itself from its context; the
mean-field map includes it with weight 1/N_p.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field

from mfgc.errors import DomainError, NonContractionError, NonConvergenceError
from mfgc.game.legendre import legendre_argmax
from mfgc.game.model import CostModel, PopulationView

logger = logging.getLogger(__name__)


class FixedPointConfig(BaseModel):
    """Stopping and safeguard settings of the consistency iteration."""
    tol: float = Field(1e-10, gt=0, description="Sup-norm tolerance on the fixed-point update.")
    max_iters: int = Field(500, ge=1, description="Iteration cap.")
    damping: float = Field(0.5, gt=0, le=1, description="Relaxation factor once damping switches on.")
    damping_threshold: float = Field(0.9, gt=0, description="Contraction estimate that switches damping on.")
    stall_window: int = Field(5, ge=1, description="Consecutive non-contracting steps before giving up.")
    stall_ratio: float = Field(1.0 - 1e-3, gt=0, description="Ratio counted as non-contracting.")
    blowup_factor: float = Field(1e6, gt=1, description="Abort when the update exceeds this multiple of the first one.")
    argmax_tol: float = Field(1e-12, gt=0, description="Tolerance of each Legendre argmax solve.")
    argmax_max_iters: int = Field(50, ge=1)


@dataclass(frozen=True)
class FixedPointResult:
    controls: np.ndarray
    iterations: int
    residual: float
    contraction_factor: float
    damped: bool


def _best_response(model: CostModel, x, p, a, include_self: bool, config: FixedPointConfig):
    ctx = PopulationView(x, a, include_self=include_self)
    return legendre_argmax(
        model, x, p, ctx, tol=config.argmax_tol, max_iters=config.argmax_max_iters, initial=a
    )


def _estimate(ratios) -> float:
    recent = ratios[-5:]
    return float(np.median(recent)) if recent else 0.0


def solve_consistency(
    positions,
    costates,
    model: CostModel,
    config: Optional[FixedPointConfig] = None,
    include_self: bool = False,
    initial=None,
) -> FixedPointResult:
    """
    Picard iteration for the consistency relation, switching to relaxation
    once the estimated contraction factor reaches the damping threshold.

    Axis 0 of positions and costates indexes the entities; trailing axes are
    independent populations (e.g. time nodes) solved together.

    Raises:
        NonContractionError: update ratios stay near or above 1, or the update blows up
        NonConvergenceError: tolerance not met within max_iters
    """
    config = config or FixedPointConfig()
    x = np.asarray(positions, dtype=float)
    p = np.asarray(costates, dtype=float)
    if x.shape != p.shape or x.ndim == 0:
        raise DomainError("positions and costates must be arrays of one shape with an entity axis")
    if not include_self and x.shape[0] < 2:
        raise DomainError("the N-player consistency relation needs N >= 2", x.shape[0])

    a = np.zeros_like(x) if initial is None else np.array(initial, dtype=float)

    if model.coupling_norm == 0:
        # Context-free best responses: one pass is exact
        a = _best_response(model, x, p, a, include_self, config)
        return FixedPointResult(controls=a, iterations=1, residual=0.0, contraction_factor=0.0, damped=False)

    theta, damped = 1.0, False
    ratios: list = []
    first_norm: Optional[float] = None
    previous: Optional[float] = None
    stall = 0

    for iteration in range(1, config.max_iters + 1):
        target = _best_response(model, x, p, a, include_self, config)
        norm = float(np.max(np.abs(target - a)))
        if norm <= config.tol:
            return FixedPointResult(
                controls=target,
                iterations=iteration,
                residual=norm,
                contraction_factor=_estimate(ratios),
                damped=damped,
            )

        first_norm = norm if first_norm is None else first_norm
        if norm > config.blowup_factor * first_norm:
            raise NonContractionError("Consistency update blew up", iteration, norm, _estimate(ratios))

        if previous is not None and previous > 0:
            ratio = norm / previous
            ratios.append(ratio)
            stall = stall + 1 if ratio >= config.stall_ratio else 0
            if stall >= config.stall_window:
                raise NonContractionError(
                    "Consistency map is not contractive", iteration, norm, _estimate(ratios)
                )
            if not damped and _estimate(ratios) >= config.damping_threshold:
                theta, damped = config.damping, True
                stall = 0
                logger.warning(
                    "Contraction estimate %.3f >= %.2f, relaxing updates with theta=%.2f",
                    _estimate(ratios), config.damping_threshold, theta,
                )
        previous = norm
        a = a + theta * (target - a)

    raise NonConvergenceError("Consistency fixed point did not converge", config.max_iters, previous or 0.0)


def consistency_fixed_point_nplayer(
    positions, costates, model: CostModel, config: Optional[FixedPointConfig] = None, initial=None
) -> FixedPointResult:
    """Fixed point of a^i <- argmax for player i facing the other N-1 players."""
    return solve_consistency(positions, costates, model, config, include_self=False, initial=initial)


def consistency_fixed_point_mf(
    states, costates, model: CostModel, config: Optional[FixedPointConfig] = None, initial=None
) -> FixedPointResult:
    """Fixed point against the empirical pair measure of all N_p particles, self included."""
    return solve_consistency(states, costates, model, config, include_self=True, initial=initial)
