"""
Picard solver for the deterministic Pontryagin systems.

For a control field A on the grid:
    forward   X' = A,               X(0) = z
    backward  Y' = -D_xL(X, A),     Y(T) = D_xg(X(T))
    update    A <- consistency fixed point at (X, Y), solved at all nodes at once

Both integrations use Heun's method, which reduces to the trapezoid rule
because the driver does not depend on the unknown. The outer update is
relaxed, A <- A + theta (A_hat - A), with theta halved whenever the observed
contraction of the outer map stays above the damping threshold.
"""

import logging
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import cumulative_trapezoid

from mfgc.errors import DomainError, NonContractionError, NonConvergenceError
from mfgc.game.consistency import FixedPointConfig, solve_consistency
from mfgc.game.legendre import legendre_argmax
from mfgc.game.model import CostModel, PopulationView
from mfgc.grid import TimeGrid
from mfgc.solvers.bundle import BundleMode, Defects, SolveReport, StabilityResult, TrajectoryBundle

logger = logging.getLogger(__name__)

InitSampler = Callable[[np.random.Generator, int], np.ndarray]


class SolverConfig(BaseModel):
    """Outer-loop settings; the inner tolerance follows the outer one unless set."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    outer_tol: float = Field(1e-8, gt=0, description="Sup-norm tolerance on the outer control update.")
    max_outer_iters: int = Field(500, ge=1)
    damping: float = Field(0.5, gt=0, le=1, description="First relaxation factor once damping switches on.")
    min_damping: float = Field(1.0 / 64, gt=0, le=1, description="Smallest relaxation factor tried.")
    damping_threshold: float = Field(0.9, gt=0)
    stall_ratio: float = Field(1.0 - 1e-3, gt=0)
    stall_window: int = Field(5, ge=2)
    blowup_factor: float = Field(1e6, gt=1)
    inner: Optional[FixedPointConfig] = None
    warm_start: Optional[np.ndarray] = Field(None, description="Initial control field, shape (N, M+1).")
    raise_on_failure: bool = True

    @model_validator(mode="after")
    def _inner_tolerance(self) -> "SolverConfig":
        if self.inner is None:
            self.inner = FixedPointConfig(tol=self.outer_tol / 100)
        if self.min_damping > self.damping:
            raise ValueError("min_damping must not exceed damping")
        return self


####################################
# Integrators
####################################

def integrate_forward(z: np.ndarray, A: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """X_m = z + sum of trapezoids of A up to node m."""
    return np.asarray(z, dtype=float)[:, None] + cumulative_trapezoid(A, dx=grid.dt, axis=1, initial=0.0)


def integrate_backward(
    model: CostModel, X: np.ndarray, A: np.ndarray, grid: TimeGrid, include_self: bool
) -> np.ndarray:
    """Y_m = D_xg(X_T) + integral from t_m to T of D_xL(X, A), by trapezoids."""
    terminal = model.grad_terminal(X[:, -1], PopulationView(X[:, -1], A[:, -1], include_self))
    driver = model.grad_x(X, A, PopulationView(X, A, include_self))
    driver = np.broadcast_to(driver, X.shape)
    cumulative = cumulative_trapezoid(driver, dx=grid.dt, axis=1, initial=0.0)
    return terminal[:, None] + (cumulative[:, -1:] - cumulative)


####################################
# Outer Picard loop
####################################

def _fail(report: SolveReport, config: SolverConfig, error: NonConvergenceError) -> None:
    report.message = str(error)
    logger.warning("Picard solve failed: %s", error)
    if config.raise_on_failure:
        raise error


def _picard(
    model: CostModel,
    z: np.ndarray,
    grid: TimeGrid,
    config: SolverConfig,
    mode: BundleMode,
):
    include_self = mode.includes_self
    n = z.shape[0]
    if config.warm_start is not None:
        A = np.array(config.warm_start, dtype=float)
        if A.shape != (n, grid.size):
            raise DomainError(f"warm start has shape {A.shape}, expected {(n, grid.size)}")
    else:
        A = np.zeros((n, grid.size))

    report = SolveReport()
    theta = 1.0
    previous: Optional[float] = None
    first: Optional[float] = None
    ratios: list = []
    A_hat = A

    for iteration in range(1, config.max_outer_iters + 1):
        report.outer_iterations = iteration
        X = integrate_forward(z, A, grid)
        Y = integrate_backward(model, X, A, grid, include_self)
        try:
            inner = solve_consistency(X, Y, model, config.inner, include_self=include_self, initial=A)
        except NonConvergenceError as e:
            if isinstance(e, NonContractionError):
                report.degeneracy_flag = True
                report.contraction_factor = e.factor
            _fail(report, config, e)
            return X, Y, A, report
        A_hat = inner.controls

        norm = float(np.max(np.abs(A_hat - A)))
        report.history.append(norm)
        report.update_norm = norm
        logger.debug("outer iteration %d: update %.3e, theta %.3g", iteration, norm, theta)

        if norm <= config.outer_tol:
            report.converged = True
            break

        first = norm if first is None else first
        if norm > config.blowup_factor * first:
            report.degeneracy_flag = True
            _fail(report, config, NonContractionError(
                "Outer Picard iteration blew up", iteration, norm, report.contraction_factor
            ))
            return X, Y, A, report

        if previous is not None and previous > 0:
            ratios.append(norm / previous)
            window = ratios[-config.stall_window:]
            report.contraction_factor = float(np.median(window))
            if len(ratios) >= 2 and report.contraction_factor >= config.damping_threshold:
                if theta > config.min_damping:
                    theta = config.damping if theta == 1.0 else max(theta / 2, config.min_damping)
                    ratios = []
                    logger.warning(
                        "Outer contraction estimate %.3f, relaxing with theta=%.4g",
                        report.contraction_factor, theta,
                    )
                elif len(window) >= config.stall_window and min(window) >= config.stall_ratio:
                    report.degeneracy_flag = True
                    _fail(report, config, NonContractionError(
                        "Outer Picard iteration is not contractive",
                        iteration, norm, report.contraction_factor,
                    ))
                    return X, Y, A, report
        previous = norm
        A = A + theta * (A_hat - A)

    report.damping = theta
    if not report.converged:
        _fail(report, config, NonConvergenceError(
            "Outer Picard iteration did not converge", report.outer_iterations, report.update_norm
        ))
        return X, Y, A, report

    # Final controls are the consistent ones; states and costates follow them
    A = A_hat
    X = integrate_forward(z, A, grid)
    Y = integrate_backward(model, X, A, grid, include_self)
    bundle = TrajectoryBundle(mode, grid, X, Y, A)
    defects = residuals(bundle, model, config=config.inner)
    report.forward_defect = defects.forward
    report.backward_defect = defects.backward
    report.consistency_residual = defects.consistency
    logger.info(
        "Picard solve converged in %d outer iterations (update %.2e, consistency %.2e)",
        report.outer_iterations, report.update_norm, report.consistency_residual,
    )
    return X, Y, A, report


def solve_nplayer_deterministic(
    model: CostModel,
    init: Sequence[float],
    grid: TimeGrid,
    config: Optional[SolverConfig] = None,
):
    """
    Deterministic N-player equilibrium from Dirac initial positions.

    Returns:
        (TrajectoryBundle, SolveReport); with raise_on_failure=False a failed
        solve returns the last iterate and an unconverged report
    """
    config = config or SolverConfig()
    z = np.atleast_1d(np.asarray(init, dtype=float))
    if z.ndim != 1 or z.size < 2:
        raise DomainError("the N-player solver needs at least two initial positions", z.size)
    X, Y, A, report = _picard(model, z, grid, config, BundleMode.NPLAYER)
    return TrajectoryBundle(BundleMode.NPLAYER, grid, X, Y, A), report


def gaussian_initial_sampler(mu0: float, s0: float) -> InitSampler:
    """Sampler of m_0(x) = s0/sqrt(pi) exp(-(s0 (x - mu0))^2), i.e. N(mu0, 1/(2 s0^2))."""
    if not s0 > 0:
        raise DomainError("inverse width s0 must be positive", s0)
    std = 1.0 / (np.sqrt(2.0) * s0)

    def sample(rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(mu0, std, size=n)

    return sample


def dirac_sampler(z: Sequence[float]) -> InitSampler:
    points = np.atleast_1d(np.asarray(z, dtype=float))

    def sample(rng: np.random.Generator, n: int) -> np.ndarray:
        return np.resize(points, n)

    return sample


def solve_mfg_particles(
    model: CostModel,
    init_sampler: InitSampler,
    n_particles: int,
    grid: TimeGrid,
    config: Optional[SolverConfig] = None,
    seed: Optional[int] = 0,
):
    """
    Particle discretization of the deterministic mean-field PMP system.

    Each particle sees the empirical measure of all particles, itself included.
    Initial positions come from init_sampler(default_rng(seed), n_particles).
    """
    if n_particles < 1:
        raise DomainError("n_particles must be at least 1", n_particles)
    config = config or SolverConfig()
    z = np.asarray(init_sampler(np.random.default_rng(seed), n_particles), dtype=float)
    X, Y, A, report = _picard(model, z, grid, config, BundleMode.MEAN_FIELD_PARTICLES)
    return TrajectoryBundle(BundleMode.MEAN_FIELD_PARTICLES, grid, X, Y, A), report


####################################
# Diagnostics
####################################

def residuals(
    bundle: TrajectoryBundle,
    model: CostModel,
    grid: Optional[TimeGrid] = None,
    config: Optional[FixedPointConfig] = None,
) -> Defects:
    """
    Recompute the discrete defects of a bundle.

    forward:     max |X_{m+1} - X_m - trapezoid of A|
    backward:    max |Y - (D_xg(X_T) + integral of D_xL)|
    consistency: max |one best-response pass at (X, Y) - A|
    """
    grid = grid or bundle.grid
    include_self = bundle.mode.includes_self
    X, Y, A = bundle.X, bundle.Y, bundle.A

    steps = np.diff(X, axis=1) - 0.5 * grid.dt * (A[:, 1:] + A[:, :-1])
    forward = float(np.max(np.abs(steps))) if steps.size else 0.0
    backward = float(np.max(np.abs(Y - integrate_backward(model, X, A, grid, include_self))))

    config = config or FixedPointConfig()

    ctx = PopulationView(X, A, include_self=include_self)
    response = legendre_argmax(
        model, X, Y, ctx, tol=config.argmax_tol, max_iters=config.argmax_max_iters, initial=A
    )
    consistency = float(np.max(np.abs(response - A)))
    return Defects(forward=forward, backward=backward, consistency=consistency)


def stability_probe(
    model: CostModel,
    init_a: Sequence[float],
    init_b: Sequence[float],
    grid: TimeGrid,
    config: Optional[SolverConfig] = None,
) -> StabilityResult:
    """
    Empirical stability constant sup_t sum_i |X^a_i - X^b_i| / sum_i |z^a_i - z^b_i|.

    Identical initial data give ratio 0 with the degenerate flag set.
    """
    za = np.asarray(init_a, dtype=float)
    zb = np.asarray(init_b, dtype=float)
    if za.shape != zb.shape:
        raise DomainError("both initializations need the same number of players")
    denominator = float(np.sum(np.abs(za - zb)))
    bundle_a, report_a = solve_nplayer_deterministic(model, za, grid, config)
    if denominator == 0.0:
        return StabilityResult(ratio=0.0, numerator=0.0, denominator=0.0, degenerate=True,
                               report_a=report_a, report_b=report_a)
    bundle_b, report_b = solve_nplayer_deterministic(model, zb, grid, config)
    numerator = float(np.max(np.sum(np.abs(bundle_a.X - bundle_b.X), axis=0)))
    return StabilityResult(
        ratio=numerator / denominator,
        numerator=numerator,
        denominator=denominator,
        degenerate=False,
        report_a=report_a,
        report_b=report_b,
    )
