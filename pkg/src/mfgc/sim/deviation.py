"""
Unilateral-deviation test of a candidate equilibrium.

Each perturbation replaces one player's feedback by alpha^i + epsilon * shape
and re-simulates with the same seed, so baseline and deviation share their
noise and initial draws. Verdicts compare the paired cost difference with
its standard error.
"""

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from mfgc.errors import DomainError
from mfgc.game.model import CostModel
from mfgc.sim.paths import CostEstimate, FeedbackSet, SimConfig, pathwise_costs, simulate

logger = logging.getLogger(__name__)

FAIL_SIGMAS = 3.0
ABS_TOL = 1e-9

Shape = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


class Verdict(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class Perturbation:
    """delta(t, x) = epsilon * shape(t, x, alpha^i(t, x))."""
    family: str
    epsilon: float
    shape: Shape

    @property
    def label(self) -> str:
        return f"{self.family}{self.epsilon:+g}"

    def apply(self, base: Callable) -> Callable:
        eps, shape = self.epsilon, self.shape

        def deviated(t, x):
            a = base(t, x)
            return a + eps * shape(t, x, a)

        return deviated


def constant_shift(epsilon: float) -> Perturbation:
    return Perturbation("shift", epsilon, lambda t, x, a: np.ones_like(a))


def gain_scaling(epsilon: float) -> Perturbation:
    return Perturbation("gain", epsilon, lambda t, x, a: a)


def time_bump(epsilon: float, horizon: float) -> Perturbation:
    return Perturbation("bump", epsilon, lambda t, x, a: np.full_like(a, np.sin(np.pi * t / horizon) ** 2))


def default_perturbations(horizon: float) -> List[Perturbation]:
    """Twelve families: shifts +-0.1, +-0.5, +-1; gain scalings +-0.1, +-0.5; time bumps +-0.5."""
    perturbations = [constant_shift(s * e) for e in (0.1, 0.5, 1.0) for s in (1, -1)]
    perturbations += [gain_scaling(s * e) for e in (0.1, 0.5) for s in (1, -1)]
    perturbations += [time_bump(s * 0.5, horizon) for s in (1, -1)]
    return perturbations


@dataclass(frozen=True)
class DeviationResult:
    perturbation: Perturbation
    delta: CostEstimate
    verdict: Verdict


@dataclass
class DeviationReport:
    player: int
    baseline: CostEstimate
    results: List[DeviationResult] = field(default_factory=list)
    quadratic_fits: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.verdict != Verdict.FAIL for r in self.results)

    @property
    def refuted(self) -> bool:
        return not self.passed

    def to_rows(self) -> List[dict]:
        return [
            {
                "player": self.player,
                "perturbation": r.perturbation.label,
                "family": r.perturbation.family,
                "epsilon": r.perturbation.epsilon,
                "delta_J": r.delta.mean,
                "stderr": r.delta.stderr,
                "verdict": r.verdict.value,
            }
            for r in self.results
        ]

    def to_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        rows = self.to_rows()
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(
                f, fieldnames=["player", "perturbation", "family", "epsilon", "delta_J", "stderr", "verdict"]
            )
            writer.writeheader()
            writer.writerows(rows)
        return path


def classify(delta: CostEstimate, sigmas: float = FAIL_SIGMAS, atol: float = ABS_TOL) -> Verdict:
    """FAIL below -sigmas*stderr, INCONCLUSIVE while the noise covers the difference, PASS otherwise."""
    if delta.mean < -(sigmas * delta.stderr + atol):
        return Verdict.FAIL
    if delta.stderr > 0 and abs(delta.mean) <= delta.stderr:
        return Verdict.INCONCLUSIVE
    return Verdict.PASS


def quadratic_fit(epsilons: Sequence[float], deltas: Sequence[float]) -> float:
    """Least-squares c in delta_J ~ c epsilon^2."""
    eps = np.asarray(epsilons, dtype=float)
    dj = np.asarray(deltas, dtype=float)
    denominator = float(np.sum(eps**4))
    return float(np.sum(dj * eps**2) / denominator) if denominator > 0 else 0.0


def deviation_test(
    equilibrium: FeedbackSet,
    model: CostModel,
    player: int,
    perturbations: Optional[Sequence[Perturbation]],
    config: SimConfig,
    init,
) -> DeviationReport:
    """
    Estimate Delta J = J^i(alpha^i + delta; alpha^-i) - J^i(alpha) for every perturbation.

    Args:
        equilibrium: Candidate equilibrium feedbacks
        model: Cost model of the game
        player: Deviating player
        perturbations: Deviations to try; the twelve default families when None
        config: Simulation settings shared by every run
        init: Initial positions or laws, as for simulate
    """
    if not 0 <= player < equilibrium.n_players:
        raise DomainError(f"player index {player} out of range", player)
    perturbations = list(perturbations) if perturbations is not None else default_perturbations(equilibrium.horizon)

    base_costs = pathwise_costs(simulate(equilibrium, init, config, model, keep_paths=False), model)[player]
    report = DeviationReport(player=player, baseline=CostEstimate.from_samples(base_costs))

    for perturbation in perturbations:
        deviated = equilibrium.replaced(player, perturbation.apply(equilibrium.feedbacks[player]))
        costs = pathwise_costs(simulate(deviated, init, config, model, keep_paths=False), model)[player]
        delta = CostEstimate.from_samples(costs - base_costs)
        verdict = classify(delta)
        if verdict == Verdict.FAIL:
            logger.info("Deviation %s lowers player %d's cost by %.3e", perturbation.label, player, -delta.mean)
        elif verdict == Verdict.INCONCLUSIVE:
            logger.warning("Deviation %s is inconclusive (stderr %.2e)", perturbation.label, delta.stderr)
        report.results.append(DeviationResult(perturbation, delta, verdict))

    families: Dict[str, List[DeviationResult]] = {}
    for result in report.results:
        families.setdefault(result.perturbation.family, []).append(result)
    for family, results in families.items():
        report.quadratic_fits[family] = quadratic_fit(
            [r.perturbation.epsilon for r in results], [r.delta.mean for r in results]
        )
    return report
