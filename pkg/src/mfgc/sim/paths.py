"""
Euler-Maruyama simulation of the N-player state equation under feedback controls.

    X^i_{m+1} = X^i_m + alpha^i(t_m, X^i_m) dt + sqrt(2 beta dt) xi^i_m

Paths are produced in blocks; block b draws from default_rng(SeedSequence([seed, b]))
so the ensemble depends only on the configuration, never on scheduling.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from mfgc.errors import BlowUpError, DomainError
from mfgc.game.model import CostModel, PopulationView
from mfgc.grid import TimeGrid

logger = logging.getLogger(__name__)

Feedback = Callable[[float, np.ndarray], np.ndarray]
InitLaw = Callable[[np.random.Generator, int], np.ndarray]


class SimConfig(BaseModel):
    beta: float = Field(0.0, ge=0, description="Noise level; the diffusion coefficient is sqrt(2 beta).")
    n_paths: int = Field(10_000, ge=1)
    dt: float = Field(1e-3, gt=0)
    seed: int = Field(0, ge=0)
    antithetic: bool = Field(False, description="Pair every noise draw with its negative.")
    block_size: int = Field(2048, ge=1, description="Paths per RNG block.")
    max_path_bytes: int = Field(256 * 2**20, ge=0, description="Size cap for keeping full paths.")


####################################
# Feedback sets
####################################

@dataclass(frozen=True)
class FeedbackSet:
    """One feedback alpha^i(t, x) per player, each vectorized in x."""
    feedbacks: Tuple[Feedback, ...]
    horizon: float
    lipschitz: Optional[float] = None

    @property
    def n_players(self) -> int:
        return len(self.feedbacks)

    def __call__(self, t: float, X: np.ndarray) -> np.ndarray:
        """X has shape (N, paths); returns the controls with the same shape."""
        return np.stack([np.broadcast_to(fn(t, X[i]), X[i].shape) for i, fn in enumerate(self.feedbacks)])

    def replaced(self, player: int, feedback: Feedback) -> "FeedbackSet":
        feedbacks = list(self.feedbacks)
        feedbacks[player] = feedback
        return FeedbackSet(tuple(feedbacks), self.horizon, None)

    @classmethod
    def affine(cls, times, K, C, lipschitz: Optional[float] = None) -> "FeedbackSet":
        """alpha^i(t, x) = K_i(t) x + C_i(t), with gains linearly interpolated in t."""
        times = np.asarray(times, dtype=float)
        C = np.atleast_2d(np.asarray(C, dtype=float))
        K = np.broadcast_to(np.asarray(K, dtype=float), C.shape)

        def make(k_curve, c_curve) -> Feedback:
            return lambda t, x: np.interp(t, times, k_curve) * x + np.interp(t, times, c_curve)

        bound = float(np.max(np.abs(K))) if lipschitz is None else lipschitz
        return cls(tuple(make(K[i], C[i]) for i in range(C.shape[0])), float(times[-1]), bound)

    @classmethod
    def from_lq(cls, solution) -> "FeedbackSet":
        """Equilibrium feedbacks of an LqNPlayerSolution."""
        return cls.affine(solution.times, solution.K, solution.C)

    @classmethod
    def open_loop(cls, times, A) -> "FeedbackSet":
        """alpha^i(t, x) = A_i(t), ignoring the state."""
        times = np.asarray(times, dtype=float)
        A = np.atleast_2d(np.asarray(A, dtype=float))

        def make(curve) -> Feedback:
            return lambda t, x: np.full(np.shape(x), np.interp(t, times, curve))

        return cls(tuple(make(A[i]) for i in range(A.shape[0])), float(times[-1]), 0.0)

    @classmethod
    def nearest(cls, bundle, n_players: Optional[int] = None) -> "FeedbackSet":
        """
        Nearest-trajectory reconstruction from a solver bundle: alpha(t, x) is the
        control of the bundle trajectory closest to x at the node nearest to t.
        All players share the field.
        """
        times, X, A = bundle.times, bundle.X, bundle.A
        order = np.argsort(X, axis=0)
        X_sorted = np.take_along_axis(X, order, axis=0)
        A_sorted = np.take_along_axis(A, order, axis=0)

        def field(t, x):
            m = int(np.clip(np.rint(t / bundle.grid.dt), 0, bundle.grid.steps))
            column = X_sorted[:, m]
            if column.size == 1:
                return np.full(np.shape(x), A_sorted[0, m])
            idx = np.clip(np.searchsorted(column, x), 1, column.size - 1)
            closer_left = np.abs(x - column[idx - 1]) <= np.abs(column[idx] - x)
            return A_sorted[np.where(closer_left, idx - 1, idx), m]

        count = n_players or bundle.n_entities
        return cls(tuple(field for _ in range(count)), bundle.grid.horizon, None)


####################################
# Simulation
####################################

@dataclass(frozen=True)
class PathEnsemble:
    """
    Result of simulate. Full paths are kept only under the configured size cap;
    costs of the model passed to simulate are always accumulated.
    """
    grid: TimeGrid
    config: SimConfig
    X_T: np.ndarray
    X: Optional[np.ndarray] = None
    A: Optional[np.ndarray] = None
    costs: Optional[np.ndarray] = None
    cost_model: Optional[CostModel] = None

    @property
    def n_players(self) -> int:
        return self.X_T.shape[0]

    @property
    def n_paths(self) -> int:
        return self.X_T.shape[1]


def noise_block(seed: int, block: int, shape: Tuple[int, ...], antithetic: bool = False) -> np.ndarray:
    """Standard normal draws of block `block`, shape (steps, players, paths)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, block]))
    if not antithetic:
        return rng.standard_normal(shape)
    steps, players, paths = shape
    half = rng.standard_normal((steps, players, (paths + 1) // 2))
    return np.concatenate([half, -half], axis=2)[:, :, :paths]


def _initial_states(init, rng: np.random.Generator, n_players: int, paths: int) -> np.ndarray:
    if callable(init):
        return np.stack([np.asarray(init(rng, paths), dtype=float) for _ in range(n_players)])
    if len(init) and callable(init[0]):
        return np.stack([np.asarray(law(rng, paths), dtype=float) for law in init])
    z = np.asarray(init, dtype=float)
    if z.shape != (n_players,):
        raise DomainError(f"expected {n_players} initial positions, got shape {z.shape}")
    return np.repeat(z[:, None], paths, axis=1)


def _trapezoid_weights(size: int, dt: float) -> np.ndarray:
    w = np.full(size, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def cost_context(x: np.ndarray, a: np.ndarray) -> PopulationView:
    """Empirical population of the simulated players; a lone player is its own population."""
    return PopulationView(x, a, include_self=np.shape(x)[0] < 2)


def simulate(
    feedbacks: FeedbackSet,
    init: Union[Sequence[float], Sequence[InitLaw], InitLaw],
    config: SimConfig,
    model: Optional[CostModel] = None,
    keep_paths: Optional[bool] = None,
) -> PathEnsemble:
    """
    Simulate all players jointly along config.n_paths independent paths.

    Args:
        feedbacks: Feedback of every player
        init: Dirac positions (one per player), one sampler per player, or one shared sampler
        config: Noise level, step, path count and seed
        model: When given, each player's pathwise cost is accumulated during the run.
            Costs are always evaluated against the N-player empirical population of
            the simulated players, also when the feedbacks come from a mean-field
            solution; the mean-field limit cost is not computed here.
        keep_paths: Keep X and A for every node; defaults to True under the size cap

    Raises:
        BlowUpError: a state became non-finite
    """
    grid = TimeGrid.from_dt(feedbacks.horizon, config.dt)
    N, P, M = feedbacks.n_players, config.n_paths, grid.steps
    path_bytes = 2 * N * P * (M + 1) * 8
    if keep_paths is None:
        keep_paths = path_bytes <= config.max_path_bytes
    elif keep_paths and path_bytes > config.max_path_bytes:
        raise DomainError(f"full paths need {path_bytes} bytes, above the cap {config.max_path_bytes}")

    times = grid.nodes
    dt = grid.dt
    diffusion = np.sqrt(2.0 * config.beta * dt)
    weights = _trapezoid_weights(M + 1, dt)

    X_T = np.empty((N, P))
    X_all = np.empty((N, P, M + 1)) if keep_paths else None
    A_all = np.empty((N, P, M + 1)) if keep_paths else None
    costs = np.zeros((N, P)) if model is not None else None

    for block, start in enumerate(range(0, P, config.block_size)):
        stop = min(start + config.block_size, P)
        width = stop - start
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, block, 1]))
        x = _initial_states(init, rng, N, width)
        xi = noise_block(config.seed, block, (M, N, width), config.antithetic) if config.beta > 0 else None

        running = np.zeros((N, width))
        for m in range(M + 1):
            a = feedbacks(times[m], x)
            if keep_paths:
                X_all[:, start:stop, m] = x
                A_all[:, start:stop, m] = a
            if model is not None:
                running += weights[m] * model.running(x, a, cost_context(x, a))
            if m == M:
                break
            x = x + a * dt
            if xi is not None:
                x = x + diffusion * xi[m]
            if not np.all(np.isfinite(x)):
                raise BlowUpError(m + 1)

        X_T[:, start:stop] = x
        if model is not None:
            costs[:, start:stop] = running + model.terminal(x, cost_context(x, a))

    logger.debug("Simulated %d paths of %d players over %d steps", P, N, M)
    return PathEnsemble(grid=grid, config=config, X_T=X_T, X=X_all, A=A_all, costs=costs, cost_model=model)


####################################
# Cost estimation
####################################

@dataclass(frozen=True)
class CostEstimate:
    mean: float
    stderr: float
    n_paths: int

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "CostEstimate":
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        stderr = float(np.std(samples, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        return cls(mean=float(np.mean(samples)), stderr=stderr, n_paths=n)


def pathwise_costs(ensemble: PathEnsemble, model: CostModel) -> np.ndarray:
    """J^i per path, shape (N, paths)."""
    if ensemble.cost_model is model and ensemble.costs is not None:
        return ensemble.costs
    if ensemble.X is None:
        raise DomainError("ensemble kept no paths and was simulated without this model")
    X, A = ensemble.X, ensemble.A
    weights = _trapezoid_weights(ensemble.grid.size, ensemble.grid.dt)
    running = model.running(X, A, cost_context(X, A))
    terminal = model.terminal(X[:, :, -1], cost_context(X[:, :, -1], A[:, :, -1]))
    return np.tensordot(running, weights, axes=([2], [0])) + terminal


def estimate_cost(ensemble: PathEnsemble, model: CostModel, player: int) -> CostEstimate:
    """Monte Carlo estimate of J^i = E[int L dt + g(X_T)] with trapezoid quadrature in time."""
    if not 0 <= player < ensemble.n_players:
        raise DomainError(f"player index {player} out of range", player)
    return CostEstimate.from_samples(pathwise_costs(ensemble, model)[player])


def write_cost_summary(estimates: Sequence[CostEstimate], path: Path) -> Path:
    """CSV with columns player, J_mean, J_stderr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["player", "J_mean", "J_stderr"])
        for i, est in enumerate(estimates):
            writer.writerow([i, repr(est.mean), repr(est.stderr)])
    return path
