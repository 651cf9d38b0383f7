"""
Legendre-transform argmax and Hamiltonian.

For fixed own state x, costate p and population context, the optimal control
solves the first-order condition p + D_aL(x, a, ctx) = 0, and
H(x, p, ctx) = -p a* - L(x, a*, ctx). Inputs may be arrays; every entry is
an independent scalar problem, so the Newton Jacobian is diagonal.
"""

import logging
from typing import Optional

import numpy as np

from mfgc.errors import CoercivityError, NonConvergenceError
from mfgc.game.model import CostContext, CostModel

logger = logging.getLogger(__name__)

ARGMAX_TOL = 1e-10
ARGMAX_MAX_ITERS = 50
_BACKTRACK_STEPS = 8


def _jacobian(model: CostModel, x, a, ctx) -> np.ndarray:
    analytic = model.hessian_a(x, a, ctx)
    if analytic is not None:
        return np.broadcast_to(analytic, np.shape(a))
    h = np.finfo(float).eps ** (1.0 / 3.0) * np.maximum(1.0, np.abs(a))
    return (model.grad_a(x, a + h, ctx) - model.grad_a(x, a - h, ctx)) / (2.0 * h)


def legendre_argmax(
    model: CostModel,
    x,
    p,
    ctx: CostContext,
    tol: float = ARGMAX_TOL,
    max_iters: int = ARGMAX_MAX_ITERS,
    initial=None,
):
    """
    Solve p + D_aL(x, a, ctx) = 0 for a by damped Newton.

    Args:
        model: Cost model with lambda_min > 0
        x: Own state(s)
        p: Costate(s), same shape as x
        ctx: Population context, frozen during the solve
        tol: Sup-norm tolerance on the first-order residual
        max_iters: Newton iteration cap
        initial: Starting control(s), zero by default

    Returns:
        a* with the broadcast shape of x and p (a float for scalar input)

    Raises:
        NonConvergenceError: residual above tol after max_iters
        CoercivityError: an iterate left the model's coercivity bound
        CallbackError: a callback returned non-finite output
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    shape = np.broadcast_shapes(x.shape, p.shape)
    a = np.zeros(shape) if initial is None else np.array(np.broadcast_to(initial, shape), dtype=float)
    scalar = a.ndim == 0

    residual = p + model.grad_a(x, a, ctx)
    norm = float(np.max(np.abs(residual)))
    iteration = 0
    while norm > tol:
        if iteration >= max_iters:
            raise NonConvergenceError("Legendre argmax stagnated", iteration, norm)
        iteration += 1

        jac = _jacobian(model, x, a, ctx)
        # Strict convexity floor in case the difference quotient degrades
        jac = np.maximum(jac, model.lambda_min)
        step = -residual / jac

        # Per-entry backtracking on |residual|
        omega = np.ones(shape)
        for _ in range(_BACKTRACK_STEPS):
            trial = a + omega * step
            trial_residual = p + model.grad_a(x, trial, ctx)
            worse = (np.abs(trial_residual) > (1.0 - 1e-4 * omega) * np.abs(residual)) & (np.abs(residual) > tol)
            if not np.any(worse):
                break
            omega = np.where(worse, 0.5 * omega, omega)
        a, residual = trial, trial_residual

        bound = float(np.max(np.abs(a)))
        if bound > model.coercivity_bound:
            raise CoercivityError(bound, model.coercivity_bound)
        norm = float(np.max(np.abs(residual)))

    if iteration > 10:
        logger.debug("Legendre argmax needed %d Newton steps (residual %.2e)", iteration, norm)
    return float(a) if scalar else a


def hamiltonian_value(model: CostModel, x, p, ctx: CostContext, **argmax_options):
    """H = -p a* - L(x, a*, ctx) with a* from legendre_argmax."""
    a_star = legendre_argmax(model, x, p, ctx, **argmax_options)
    value = -np.asarray(p, dtype=float) * a_star - model.running(x, a_star, ctx)
    return float(value) if np.ndim(value) == 0 else value
