"""
Exact solutions of the one-dimensional linear-quadratic game.

N-player costs
    L^i(a, A^-i) = 1/2 (a + kappa * mean_{j!=i} A^j)^2 + gamma a^2 / 2
    g^i(x, X^-i) = 1/2 (x + rho * mean_{j!=i} X^j)^2
and their mean-field limits. Value functions are quadratic,
w(t, x) = r x^2 / 2 + p x + q, and equilibrium feedbacks are affine,
alpha(t, x) = K x + C with K = -r / (1 + gamma).

The N-player forward-backward system for (p_i, X_i) is linear. It is solved by
superposition shooting twice: once on the aggregates (P, M) = (sum p_i, sum X_i)
and once on the per-player deviations from the aggregate means, which all
obey the same homogeneous system and differ only by their initial value.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

from mfgc.errors import DegeneracyError, DomainError, NonConvergenceError, SingularSystemError
from mfgc.grid import TimeGrid
from mfgc.lq.types import DegeneracyClass, DegeneracyReport, GameMode, LqParams

logger = logging.getLogger(__name__)

DEGENERACY_RTOL = 1e-12
IDENTITY_TOL = 1e-10
DEFAULT_MFG_STEPS = 1000

_ODE_RTOL = 1e-12
_ODE_ATOL = 1e-14


def _near(a: float, b: float, rtol: float = DEGENERACY_RTOL) -> bool:
    return abs(a - b) <= rtol * max(1.0, abs(a), abs(b))


####################################
# Riccati curve and degeneracy
####################################

def riccati_r(t, params: LqParams):
    """r(t) = (gamma+1)/(T+gamma+1-t), the quadratic coefficient of every LQ value function."""
    T, g = params.horizon, params.lam
    t_arr = np.asarray(t, dtype=float)
    slack = 1e-12 * max(1.0, T)
    if np.any(t_arr < -slack) or np.any(t_arr > T + slack):
        raise DomainError(f"t must lie in [0, {T}]", t)
    r = g / (T + g - np.clip(t_arr, 0.0, T))
    return float(r) if r.ndim == 0 else r


def classify_degeneracy(params: LqParams, mode: Optional[GameMode] = None) -> DegeneracyReport:
    """Place the parameters relative to the degeneracy lines of the LQ examples."""
    mode = mode or params.mode
    g, kappa = params.lam, params.kappa
    condition = params.semimon_condition
    determinant = condition / kappa

    def report(cls: DegeneracyClass, label: Optional[str] = None) -> DegeneracyReport:
        return DegeneracyReport(classification=cls, violated_condition=label, determinant=determinant)

    if _near(kappa, -g):
        return report(DegeneracyClass.NO_QUADRATIC_SOLUTION, "kappa = -(1+gamma)")

    if mode == GameMode.NPLAYER:
        if params.n_players is None:
            raise DomainError("N-player classification needs n_players")
        if _near(kappa, g * (params.n_players - 1)):
            return report(DegeneracyClass.NO_QUADRATIC_SOLUTION, "kappa = (1+gamma)(N-1)")
        return report(DegeneracyClass.REGULAR)

    scale = 1.0 + abs(kappa) + g + params.horizon * (1.0 + abs(params.rho))
    if abs(condition) <= DEGENERACY_RTOL * scale:
        if abs(params.mu0) <= DEGENERACY_RTOL:
            return report(DegeneracyClass.NON_UNIQUE_FAMILY, "1+kappa+gamma+T(1+rho) = 0")
        return report(DegeneracyClass.INCONSISTENT_SYSTEM, "1+kappa+gamma+T(1+rho) = 0, mu(0) != 0")
    return report(DegeneracyClass.REGULAR)


def lq_hamiltonian(p, mean_control, kappa: float, gamma: float):
    """Closed-form Hamiltonian of the LQ running cost at costate p."""
    g = 1.0 + gamma
    return (
        p**2 / (2 * g)
        + kappa * p * mean_control / g
        - gamma * kappa**2 * mean_control**2 / (2 * g)
    )


####################################
# Superposition shooting
####################################

Coefficients = Callable[[float], np.ndarray]


def _fundamental_matrix(coeffs: Coefficients, nodes: np.ndarray) -> np.ndarray:
    """Phi with Phi' = A(t) Phi, Phi(0) = I, sampled at the nodes; shape (2, 2, n_nodes)."""

    def rhs(t, y):
        return (coeffs(t) @ y.reshape(2, 2)).ravel()

    sol = solve_ivp(
        rhs,
        (nodes[0], nodes[-1]),
        np.eye(2).ravel(),
        method="DOP853",
        t_eval=nodes,
        rtol=_ODE_RTOL,
        atol=_ODE_ATOL,
    )
    if not sol.success:
        raise NonConvergenceError(f"Basis integration failed: {sol.message}", sol.nfev, float("nan"))
    return sol.y.reshape(2, 2, -1)


def _shoot(coeffs: Coefficients, x0: float, terminal_ratio: float, nodes: np.ndarray):
    """
    Solve y = (p, x), y' = A(t) y with x(0) = x0 and p(T) = terminal_ratio * x(T).

    The two columns of the fundamental matrix are the basis solutions; their
    coefficients come from a 2x2 system holding both boundary conditions.

    Returns:
        (p, x, determinant) with p, x sampled at the nodes
    """
    phi = _fundamental_matrix(coeffs, nodes)
    end = phi[:, :, -1]
    system = np.array([
        [0.0, 1.0],
        [end[0, 0] - terminal_ratio * end[1, 0], end[0, 1] - terminal_ratio * end[1, 1]],
    ])
    det = float(np.linalg.det(system))
    if abs(det) <= DEGENERACY_RTOL * max(1.0, float(np.abs(system).max())):
        raise SingularSystemError("Shooting matrix is singular", det)
    coef = np.linalg.solve(system, np.array([x0, 0.0]))
    path = np.einsum("ijm,j->im", phi, coef)
    return path[0], path[1], det


####################################
# N-player game
####################################

@dataclass(frozen=True)
class LqNPlayerSolution:
    """Coefficient curves of the N-player LQ equilibrium on a time grid.

    Arrays indexed by player have shape (N, M+1); r and K are shared by all players.
    """
    params: LqParams
    times: np.ndarray
    r: np.ndarray
    K: np.ndarray
    p: np.ndarray
    q: np.ndarray
    C: np.ndarray
    X: np.ndarray
    P: np.ndarray
    M: np.ndarray
    shooting_determinant: float

    @property
    def n_players(self) -> int:
        return self.X.shape[0]

    @property
    def controls(self) -> np.ndarray:
        """A_i(t) = K(t) X_i(t) + C_i(t) along the equilibrium trajectories."""
        return self.K * self.X + self.C

    @property
    def others_mean_control(self) -> np.ndarray:
        """mean_{j!=i} A_j(t), shape (N, M+1)."""
        A = self.controls
        return (A.sum(axis=0) - A) / (self.n_players - 1)

    def _at(self, curve: np.ndarray, t) -> np.ndarray:
        return np.interp(t, self.times, curve)

    def value(self, player: int, t, x):
        return 0.5 * self._at(self.r, t) * x**2 + self._at(self.p[player], t) * x + self._at(self.q[player], t)

    def gradient(self, player: int, t, x):
        return self._at(self.r, t) * x + self._at(self.p[player], t)

    def feedback(self, player: int, t, x):
        return self._at(self.K, t) * x + self._at(self.C[player], t)

    def mean_control(self, player: int, t):
        return self._at(self.others_mean_control[player], t)

    def boundary_residual(self) -> float:
        """max of |p_i(T) - rho mean_{j!=i} X_j(T)| and |P(T) - rho M(T)|."""
        rho, N = self.params.rho, self.n_players
        XT = self.X[:, -1]
        target = rho * (XT.sum() - XT) / (N - 1)
        return float(max(np.abs(self.p[:, -1] - target).max(), abs(self.P[-1] - rho * self.M[-1])))


def solve_nplayer_lq(params: LqParams, grid: TimeGrid) -> LqNPlayerSolution:
    """
    Equilibrium of the N-player LQ game with Dirac initial positions.

    Raises:
        DegeneracyError: kappa on -(1+gamma) or (1+gamma)(N-1)
        SingularSystemError: the shooting matrix is singular
    """
    if params.initial_positions is None:
        raise DomainError("solve_nplayer_lq needs Dirac initial positions")
    if not _near(grid.horizon, params.horizon):
        raise DomainError(f"Grid horizon {grid.horizon} != game horizon {params.horizon}")
    report = classify_degeneracy(params, GameMode.NPLAYER)
    if not report.regular:
        raise DegeneracyError(report)

    N = params.n_players
    z = np.asarray(params.initial_positions, dtype=float)
    g, kappa, T = params.lam, params.kappa, params.horizon
    k = kappa + g
    b = g - kappa / (N - 1)
    nodes = grid.nodes

    def aggregate(t: float) -> np.ndarray:
        r = g / (T + g - t)
        return np.array([
            [r / k, -kappa * r * r / (g * k)],
            [-1.0 / k, -r / g + kappa * r / (g * k)],
        ])

    def deviation(t: float) -> np.ndarray:
        r = g / (T + g - t)
        c = kappa * r / (g * b * (N - 1))
        return np.array([
            [r / b, r * c],
            [-1.0 / b, -r / g - c],
        ])

    P, M, det = _shoot(aggregate, float(z.sum()), params.rho, nodes)
    e_unit, x_unit, _ = _shoot(deviation, 1.0, -params.rho / (N - 1), nodes)

    dz = (z - z.mean())[:, None]
    X = M / N + dz * x_unit
    p = P / N + dz * e_unit

    r = riccati_r(nodes, params)
    K = -r / g
    total_C = (-P + kappa * r * M / g) / k
    C = (-p - kappa / (N - 1) * (total_C + K * M - K * X)) / b

    # q' = -(p^2/2 + g p C + gamma g C^2/2) - beta r, integrated backward from q(T) = p(T)^2/2
    integrand = 0.5 * p**2 + g * p * C + 0.5 * params.gamma * g * C**2 + params.beta * r
    cumulative = cumulative_trapezoid(integrand, nodes, axis=1, initial=0.0)
    q = 0.5 * p[:, -1:] ** 2 + (cumulative[:, -1:] - cumulative)

    solution = LqNPlayerSolution(
        params=params, times=nodes, r=r, K=K, p=p, q=q, C=C, X=X, P=P, M=M,
        shooting_determinant=det,
    )
    logger.debug("N-player LQ solved: N=%d, boundary residual %.2e", N, solution.boundary_residual())
    return solution


####################################
# Mean field game
####################################

@dataclass(frozen=True)
class LqMfgSolution:
    """Closed-form LQ mean field equilibrium with Gaussian initial law.

    Curves are exact functions of t; the *_curve properties sample them on `times`.
    """
    params: LqParams
    B: float
    D: float
    E: float
    determinant: float
    times: np.ndarray

    @property
    def _S(self) -> float:
        return self.params.horizon + self.params.lam

    @property
    def u(self) -> float:
        """B - 2(T+gamma+1)D/kappa; C(t) = u/(T+gamma+1-t)."""
        return self.B - 2 * self._S * self.D / self.params.kappa

    def _tau(self, t):
        return self._S - np.asarray(t, dtype=float)

    def r(self, t):
        return self.params.lam / self._tau(t)

    def K(self, t):
        return -1.0 / self._tau(t)

    def mu(self, t):
        return self.B - self.D * (self._S + np.asarray(t, dtype=float)) / self.params.kappa

    def p(self, t):
        g, kappa, tau = self.params.lam, self.params.kappa, self._tau(t)
        return -self.B * g / tau + self.D * (2 * g * self._S / (kappa * tau) + 1.0)

    def C(self, t):
        return self.u / self._tau(t)

    def q(self, t):
        g, tau = self.params.lam, self._tau(t)
        t = np.asarray(t, dtype=float)
        return (
            g * self.u**2 / (2 * tau)
            - 0.5 * self.D**2 * t
            + self.params.beta * g * np.log(tau / g)
            + self.E
        )

    def s(self, t):
        return self.params.s0 * self._S / self._tau(t)

    def mean_control(self, t):
        """Mean of nu_t, i.e. K mu + C."""
        return self.K(t) * self.mu(t) + self.C(t)

    def value(self, t, x):
        return 0.5 * self.r(t) * x**2 + self.p(t) * x + self.q(t)

    def gradient(self, t, x):
        return self.r(t) * x + self.p(t)

    def feedback(self, t, x):
        return self.K(t) * x + self.C(t)

    def density(self, t, x):
        """Gaussian density m(t, x) = s/sqrt(pi) exp(-(s (x - mu))^2)."""
        s = self.s(t)
        return s / np.sqrt(np.pi) * np.exp(-((s * (x - self.mu(t))) ** 2))

    def control_law(self, t) -> Tuple[float, float]:
        """(mean, variance) of nu_t, the image of m_t under the affine feedback."""
        K, s = self.K(t), self.s(t)
        return float(self.mean_control(t)), float(K**2 / (2 * s**2))

    def copy_paths(self, z, times: Optional[np.ndarray] = None):
        """
        Deterministic mean-field trajectories started at the points z.

        X(t) = u + (z - u) tau(t)/tau(0) solves X' = K X + C exactly and the
        control along each path is the constant -(z - u)/tau(0).

        Returns:
            (X, A) of shape (len(z), len(times))
        """
        times = self.times if times is None else np.asarray(times, dtype=float)
        z = np.atleast_1d(np.asarray(z, dtype=float))[:, None]
        ratio = self._tau(times)[None, :] / self._S
        X = self.u + (z - self.u) * ratio
        A = np.broadcast_to(-(z - self.u) / self._S, X.shape).copy()
        return X, A

    def boundary_residual(self) -> float:
        T, rho = self.params.horizon, self.params.rho
        return float(max(abs(self.p(T) - rho * self.mu(T)), abs(self.mu(0.0) - self.params.mu0)))

    @property
    def mu_curve(self) -> np.ndarray:
        return self.mu(self.times)

    @property
    def p_curve(self) -> np.ndarray:
        return self.p(self.times)

    @property
    def C_curve(self) -> np.ndarray:
        return self.C(self.times)

    @property
    def q_curve(self) -> np.ndarray:
        return self.q(self.times)

    @property
    def s_curve(self) -> np.ndarray:
        return self.s(self.times)

    @property
    def r_curve(self) -> np.ndarray:
        return self.r(self.times)


def mfg_system_matrix(params: LqParams) -> np.ndarray:
    """The 2x2 matrix acting on (B, D) with right-hand side (mu(0), 0)."""
    T, g, kappa, rho = params.horizon, params.lam, params.kappa, params.rho
    S = T + g
    return np.array([
        [1.0, -S / kappa],
        [-1.0 - rho, (2 * S + rho * (2 * T + g)) / kappa + 1.0],
    ])


def solve_mfg_lq(params: LqParams, grid: Optional[TimeGrid] = None) -> LqMfgSolution:
    """
    Closed-form LQ mean field equilibrium.

    Raises:
        DegeneracyError: kappa = -(1+gamma) or vanishing determinant
    """
    report = classify_degeneracy(params, GameMode.MEAN_FIELD)
    if not report.regular:
        raise DegeneracyError(report)

    grid = grid or TimeGrid(params.horizon, DEFAULT_MFG_STEPS)
    matrix = mfg_system_matrix(params)
    det = float(np.linalg.det(matrix))
    B, D = np.linalg.solve(matrix, np.array([params.mu0, 0.0]))

    T, g, kappa = params.horizon, params.lam, params.kappa
    u = B - 2 * (T + g) * D / kappa
    mu_T = B - D * (2 * T + g) / kappa
    # q(T) = (rho mu(T))^2 / 2 fixes the additive constant
    E = 0.5 * (params.rho * mu_T) ** 2 - 0.5 * u**2 + 0.5 * D**2 * T

    return LqMfgSolution(
        params=params, B=float(B), D=float(D), E=float(E), determinant=det, times=grid.nodes
    )


####################################
# Evaluation and export
####################################

@dataclass(frozen=True)
class LqEvaluation:
    value: float
    gradient: float
    feedback: float
    consistency_residual: float


def eval_lq(
    sol: Union[LqNPlayerSolution, LqMfgSolution],
    t: float,
    x: float,
    player: Optional[int] = None,
) -> LqEvaluation:
    """Value, gradient and feedback at (t, x), plus the residual of
    feedback = -(gradient + kappa * mean control)/(1+gamma)."""
    g, kappa = sol.params.lam, sol.params.kappa
    if isinstance(sol, LqNPlayerSolution):
        if player is None:
            raise DomainError("N-player evaluation needs a player index")
        value = sol.value(player, t, x)
        gradient = sol.gradient(player, t, x)
        feedback = sol.feedback(player, t, x)
        mean_control = sol.mean_control(player, t)
    else:
        value = sol.value(t, x)
        gradient = sol.gradient(t, x)
        feedback = sol.feedback(t, x)
        mean_control = sol.mean_control(t)
    residual = abs(feedback + (gradient + kappa * mean_control) / g)
    return LqEvaluation(
        value=float(value),
        gradient=float(gradient),
        feedback=float(feedback),
        consistency_residual=float(residual),
    )


def write_solution_csv(sol: Union[LqNPlayerSolution, LqMfgSolution], path: Path) -> Path:
    """Write coefficient curves; one row per (player, node) or per node for the MFG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        if isinstance(sol, LqNPlayerSolution):
            writer.writerow(["player", "t", "r", "p", "q", "K", "C", "X"])
            for i in range(sol.n_players):
                for m, t in enumerate(sol.times):
                    writer.writerow([i, repr(float(t)), repr(float(sol.r[m])), repr(float(sol.p[i, m])),
                                     repr(float(sol.q[i, m])), repr(float(sol.K[m])),
                                     repr(float(sol.C[i, m])), repr(float(sol.X[i, m]))])
        else:
            writer.writerow(["t", "r", "p", "q", "K", "C", "mu", "s"])
            for t in sol.times:
                writer.writerow([repr(float(v)) for v in (
                    t, sol.r(t), sol.p(t), sol.q(t), sol.K(t), sol.C(t), sol.mu(t), sol.s(t)
                )])
    return path
