"""
Built-in cost models.

lq
    L = 1/2 (a + kappa*A_bar)^2 + gamma a^2/2,    g = 1/2 (x + rho*X_bar)^2
quadratic-plus-potential
    L = k a^2/2 + zeta log cosh(a) + eta a A_bar + omega log cosh(x) + lam/2 (x - X_bar)^2
    g = w/2 (x + rho*X_bar)^2

A_bar and X_bar are the context means of controls and states.
"""

import numpy as np

from mfgc.errors import DomainError
from mfgc.game.model import CostModel, mean_control, mean_state, register_model
from mfgc.lq.types import LqParams


def _log_cosh(v):
    # Overflow-free log(cosh(v))
    v = np.abs(v)
    return v + np.log1p(np.exp(-2.0 * v)) - np.log(2.0)


@register_model("lq")
def lq_model(kappa: float, gamma: float, rho: float = 0.0, **_ignored) -> CostModel:
    """LQ costs of the control-coupled game; extra LqParams fields are accepted and ignored."""
    g = 1.0 + gamma

    def L(x, a, ctx):
        return 0.5 * (a + kappa * mean_control(ctx)) ** 2 + 0.5 * gamma * a**2

    def D_aL(x, a, ctx):
        return g * a + kappa * mean_control(ctx)

    def D_xL(x, a, ctx):
        return np.zeros_like(np.asarray(x, dtype=float) + np.asarray(a, dtype=float))

    def terminal(x, ctx):
        return 0.5 * (x + rho * mean_state(ctx)) ** 2

    def D_xg(x, ctx):
        return x + rho * mean_state(ctx)

    def D2_aaL(x, a, ctx):
        return np.full(np.shape(a), g)

    return CostModel(
        name="lq",
        L=L,
        D_aL=D_aL,
        D_xL=D_xL,
        g=terminal,
        D_xg=D_xg,
        lambda_min=g,
        lambda_max=g,
        coupling_norm=abs(kappa),
        D2_aaL=D2_aaL,
        lipschitz={"D_aL": g + abs(kappa), "D_xL": 0.0, "D_xg": 1.0 + abs(rho)},
        params={"kappa": kappa, "gamma": gamma, "rho": rho},
    )


def lq_model_from_params(params: LqParams) -> CostModel:
    return lq_model(kappa=params.kappa, gamma=params.gamma, rho=params.rho)


@register_model("quadratic-plus-potential")
def quadratic_plus_potential_model(
    control_weight: float = 1.0,
    curvature: float = 0.0,
    coupling: float = 0.0,
    potential: float = 1.0,
    spread: float = 0.0,
    terminal_weight: float = 1.0,
    terminal_coupling: float = 0.0,
) -> CostModel:
    """
    Strictly convex control cost plus a state potential.

    Args:
        control_weight: k > 0, quadratic weight on the control
        curvature: zeta >= 0, weight of the log-cosh control term
        coupling: eta, control coupling through the mean control
        potential: omega, weight of the log-cosh state potential
        spread: lam >= 0, attraction to the mean state
        terminal_weight: w >= 0
        terminal_coupling: rho
    """
    if curvature < 0:
        raise DomainError("curvature must be nonnegative to keep L strictly convex in a", curvature)
    k, zeta, eta = control_weight, curvature, coupling
    omega, lam, w, rho = potential, spread, terminal_weight, terminal_coupling

    def L(x, a, ctx):
        return (
            0.5 * k * a**2
            + zeta * _log_cosh(a)
            + eta * a * mean_control(ctx)
            + omega * _log_cosh(x)
            + 0.5 * lam * (x - mean_state(ctx)) ** 2
        )

    def D_aL(x, a, ctx):
        return k * a + zeta * np.tanh(a) + eta * mean_control(ctx)

    def D_xL(x, a, ctx):
        return omega * np.tanh(x) + lam * (x - mean_state(ctx))

    def terminal(x, ctx):
        return 0.5 * w * (x + rho * mean_state(ctx)) ** 2

    def D_xg(x, ctx):
        return w * (x + rho * mean_state(ctx))

    def D2_aaL(x, a, ctx):
        return k + zeta / np.cosh(a) ** 2

    return CostModel(
        name="quadratic-plus-potential",
        L=L,
        D_aL=D_aL,
        D_xL=D_xL,
        g=terminal,
        D_xg=D_xg,
        lambda_min=k,
        lambda_max=k + max(zeta, 0.0),
        coupling_norm=abs(eta),
        D2_aaL=D2_aaL,
        lipschitz={
            "D_aL": k + abs(zeta) + abs(eta),
            "D_xL": abs(omega) + 2 * abs(lam),
            "D_xg": abs(w) * (1.0 + abs(rho)),
        },
        params={
            "control_weight": k,
            "curvature": zeta,
            "coupling": eta,
            "potential": omega,
            "spread": lam,
            "terminal_weight": w,
            "terminal_coupling": rho,
        },
    )
