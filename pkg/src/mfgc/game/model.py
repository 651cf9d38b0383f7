"""
Cost models with interaction through controls.

States and controls are scalars. Every callback receives the entity's own
state (and control) plus a context describing the rest of the population:

    L(x, a, ctx)     D_aL(x, a, ctx)     D_xL(x, a, ctx)
    g(x, ctx)        D_xg(x, ctx)

A context exposes a single operation, ``ctx.average(fn)``, which averages
``fn(states, controls)`` over the population the entity interacts with.
Derivatives are taken in the entity's own variables with the context frozen.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Protocol, Union

import numpy as np

from mfgc.errors import CallbackError, DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class CostContext(Protocol):
    def average(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> ArrayLike: ...


####################################
# Contexts
####################################

@dataclass(frozen=True)
class OtherPlayers:
    """The N-1 opponents of one player, each with empirical weight 1/(N-1)."""
    positions: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        positions = np.atleast_1d(np.asarray(self.positions, dtype=float))
        controls = np.atleast_1d(np.asarray(self.controls, dtype=float))
        if positions.shape != controls.shape or positions.ndim != 1:
            raise DomainError("positions and controls of the other players must be equal-length lists")
        if positions.size < 1:
            raise DomainError("at least one other player is required")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "controls", controls)

    @property
    def weight(self) -> float:
        return 1.0 / self.positions.size

    def average(self, fn):
        return float(np.mean(fn(self.positions, self.controls)))

    @classmethod
    def excluding(cls, positions, controls, player: int) -> "OtherPlayers":
        keep = np.arange(len(positions)) != player
        return cls(np.asarray(positions, dtype=float)[keep], np.asarray(controls, dtype=float)[keep])


@dataclass(frozen=True)
class EmpiricalPairMeasure:
    """Uniform empirical measure on the pairs (x_k, a_k)."""
    states: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        states = np.atleast_1d(np.asarray(self.states, dtype=float))
        controls = np.atleast_1d(np.asarray(self.controls, dtype=float))
        if states.shape != controls.shape or states.ndim != 1 or states.size < 1:
            raise DomainError("an empirical pair measure needs N_p >= 1 matching states and controls")
        if not (np.all(np.isfinite(states)) and np.all(np.isfinite(controls))):
            raise DomainError("empirical pair measure support must be finite")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "controls", controls)

    @property
    def size(self) -> int:
        return self.states.size

    def average(self, fn):
        return float(np.mean(fn(self.states, self.controls)))


@dataclass(frozen=True)
class PopulationView:
    """
    Batched context for every entity of a population at once.

    positions and controls have shape (n_entities, ...); axis 0 indexes the
    entities and any trailing axes (time nodes, sample paths) are independent
    populations. ``average`` returns one value per entity: the mean over the
    others when include_self is False, the mean over everybody otherwise.
    """
    positions: np.ndarray
    controls: np.ndarray
    include_self: bool = False

    def __post_init__(self):
        if np.shape(self.positions) != np.shape(self.controls):
            raise DomainError("population positions and controls must share a shape")
        n = np.shape(self.positions)[0]
        if not self.include_self and n < 2:
            raise DomainError("excluding self needs at least two entities", n)

    @property
    def size(self) -> int:
        return np.shape(self.positions)[0]

    def average(self, fn):
        values = np.asarray(fn(self.positions, self.controls), dtype=float)
        total = values.sum(axis=0)
        if self.include_self:
            return np.broadcast_to(total / self.size, values.shape)
        return (total - values) / (self.size - 1)


def mean_state(ctx: CostContext) -> ArrayLike:
    return ctx.average(lambda x, a: x)


def mean_control(ctx: CostContext) -> ArrayLike:
    return ctx.average(lambda x, a: a)


####################################
# Cost model
####################################

@dataclass(frozen=True)
class CostModel:
    """Running and terminal costs with their gradients and convexity metadata.

    lambda_min, lambda_max bound D^2_aa L; coupling_norm bounds the total
    sensitivity of D_aL to the other players' controls. The ratio
    coupling_norm / lambda_min below 1 makes the consistency map a contraction.
    """
    name: str
    L: Callable
    D_aL: Callable
    D_xL: Callable
    g: Callable
    D_xg: Callable
    lambda_min: float
    lambda_max: float
    coupling_norm: float
    D2_aaL: Optional[Callable] = None
    lipschitz: Dict[str, float] = field(default_factory=dict)
    coercivity_bound: float = 1e8
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.lambda_min > 0:
            raise DomainError(f"lambda_min must be positive, got {self.lambda_min}", self.lambda_min)
        if self.lambda_min > self.lambda_max:
            raise DomainError(
                f"lambda_min={self.lambda_min} exceeds lambda_max={self.lambda_max}", self.lambda_max
            )
        if self.coupling_norm < 0:
            raise DomainError("coupling_norm must be nonnegative", self.coupling_norm)

    @property
    def contraction_ratio(self) -> float:
        return self.coupling_norm / self.lambda_min

    # Checked evaluation: every callback output must be finite

    def _call(self, name: str, *args) -> np.ndarray:
        value = np.asarray(getattr(self, name)(*args), dtype=float)
        if not np.all(np.isfinite(value)):
            raise CallbackError(name, f"model '{self.name}'")
        return value

    def running(self, x, a, ctx) -> np.ndarray:
        return self._call("L", x, a, ctx)

    def grad_a(self, x, a, ctx) -> np.ndarray:
        return self._call("D_aL", x, a, ctx)

    def grad_x(self, x, a, ctx) -> np.ndarray:
        return self._call("D_xL", x, a, ctx)

    def terminal(self, x, ctx) -> np.ndarray:
        return self._call("g", x, ctx)

    def grad_terminal(self, x, ctx) -> np.ndarray:
        return self._call("D_xg", x, ctx)

    def hessian_a(self, x, a, ctx) -> Optional[np.ndarray]:
        if self.D2_aaL is None:
            return None
        return self._call("D2_aaL", x, a, ctx)


####################################
# Gradient audit
####################################

@dataclass(frozen=True)
class GradientAudit:
    model: str
    points: int
    max_rel_error: Dict[str, float]
    rtol: float

    @property
    def passed(self) -> bool:
        return all(err <= self.rtol for err in self.max_rel_error.values())


def _central_difference(fn: Callable[[float], float], at: float) -> float:
    h = np.finfo(float).eps ** (1.0 / 3.0) * max(1.0, abs(at))
    return (fn(at + h) - fn(at - h)) / (2.0 * h)


def gradient_audit(
    model: CostModel,
    points: int = 100,
    seed: int = 0,
    rtol: float = 1e-5,
    n_others: int = 3,
    scale: float = 1.0,
) -> GradientAudit:
    """Compare D_aL, D_xL, D_xg against central differences of L and g at random points."""
    rng = np.random.default_rng(seed)
    errors = {"D_aL": 0.0, "D_xL": 0.0, "D_xg": 0.0}

    def rel(numeric: float, analytic: float) -> float:
        return abs(numeric - analytic) / max(1.0, abs(analytic))

    for _ in range(points):
        x, a = rng.normal(scale=scale, size=2)
        ctx = OtherPlayers(rng.normal(scale=scale, size=n_others), rng.normal(scale=scale, size=n_others))
        fd_a = _central_difference(lambda s: float(model.running(x, s, ctx)), a)
        fd_x = _central_difference(lambda s: float(model.running(s, a, ctx)), x)
        fd_g = _central_difference(lambda s: float(model.terminal(s, ctx)), x)
        errors["D_aL"] = max(errors["D_aL"], rel(fd_a, float(model.grad_a(x, a, ctx))))
        errors["D_xL"] = max(errors["D_xL"], rel(fd_x, float(model.grad_x(x, a, ctx))))
        errors["D_xg"] = max(errors["D_xg"], rel(fd_g, float(model.grad_terminal(x, ctx))))

    audit = GradientAudit(model=model.name, points=points, max_rel_error=errors, rtol=rtol)
    if not audit.passed:
        logger.warning("Gradient audit failed for model '%s': %s", model.name, errors)
    return audit


####################################
# Model registry
####################################

ModelFactory = Callable[..., CostModel]
MODEL_REGISTRY: Dict[str, ModelFactory] = {}


def register_model(name: str):
    """Decorator adding a model factory to the registry under `name`."""

    def decorator(factory: ModelFactory) -> ModelFactory:
        MODEL_REGISTRY[name] = factory
        return factory

    return decorator


def build_model(name: str, audit: bool = False, **params) -> CostModel:
    """
    Build a registered model.

    Args:
        name: Registry key, e.g. "lq" or "quadratic-plus-potential"
        audit: Run the finite-difference gradient audit and reject failing models
        **params: Factory parameters

    Raises:
        DomainError: unknown name or failed audit
    """
    # Built-in factories register on import
    import mfgc.game.builtin  # noqa: F401

    if name not in MODEL_REGISTRY:
        raise DomainError(f"Unknown model: {name}. Available: {get_available_models()}", name)
    model = MODEL_REGISTRY[name](**params)
    if audit:
        report = gradient_audit(model)
        if not report.passed:
            raise DomainError(f"Model '{name}' failed the gradient audit: {report.max_rel_error}", name)
    return model


def get_available_models() -> List[str]:
    return sorted(MODEL_REGISTRY)
