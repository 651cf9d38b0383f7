"""Displacement semimonotonicity constants of the LQ costs."""

from typing import Optional

from mfgc.errors import DomainError
from mfgc.lq.types import GameMode, LqParams, SemimonReport


def _disp(C_La: float, C_Lx: float, C_g: float, horizon: float) -> float:
    return C_La - horizon * C_g - 0.5 * horizon**2 * C_Lx


def semimon_constants(params: LqParams, mode: Optional[GameMode] = None) -> SemimonReport:
    """
    Semimonotonicity constants for the LQ game.

    N-player mode reports the closed-form minima
        C_La = min{1+gamma+(1-1/(N-1))kappa, 1+gamma-kappa/(N-1)}
        C_g  = -min{1+gamma+(1-1/(N-1))rho, 1+gamma-rho/(N-1)}
    next to the extreme eigenvalues of the two monotonicity forms,
        g I + kappa/(N-1) (11^T - I)  and  I + rho/(N-1) (11^T - I),
    which are 1+gamma+kappa, 1+gamma-kappa/(N-1) and 1+rho, 1-rho/(N-1).
    The two agree when gamma = 0 and kappa, rho >= 0.

    Mean-field mode uses the L^2 forms g E|d|^2 + kappa (E d)^2 and
    E|d|^2 + rho (E d)^2, and flags semimonotonicity by the sign of
    1+kappa+gamma+T(1+rho).
    """
    mode = mode or params.mode
    g, kappa, rho, T = params.lam, params.kappa, params.rho, params.horizon
    C_Lx = 0.0
    margin = 1.0 - abs(kappa) / g
    condition = params.semimon_condition

    if mode == GameMode.NPLAYER:
        if params.n_players is None:
            raise DomainError("N-player semimonotonicity constants need n_players")
        w = 1.0 / (params.n_players - 1)
        C_La = min(g + (1.0 - w) * kappa, g - w * kappa)
        C_g = -min(g + (1.0 - w) * rho, g - w * rho)
        C_La_eigen = min(g + kappa, g - w * kappa)
        C_g_eigen = -min(1.0 + rho, 1.0 - w * rho)
        C_disp = _disp(C_La, C_Lx, C_g, T)
        semimonotone = C_disp > 0
    else:
        C_La = C_La_eigen = min(g, g + kappa)
        C_g = C_g_eigen = -min(1.0, 1.0 + rho)
        C_disp = _disp(C_La, C_Lx, C_g, T)
        semimonotone = condition > 0

    return SemimonReport(
        mode=mode,
        C_La=C_La,
        C_Lx=C_Lx,
        C_g=C_g,
        C_disp=C_disp,
        contraction_margin=margin,
        semimonotone=semimonotone,
        contractive=margin > 0,
        condition_value=condition,
        C_La_eigen=C_La_eigen,
        C_g_eigen=C_g_eigen,
        C_disp_eigen=_disp(C_La_eigen, C_Lx, C_g_eigen, T),
    )
