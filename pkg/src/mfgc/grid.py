"""Uniform time grids shared by the oracle, the Picard solver and the simulator."""

from dataclasses import dataclass

import numpy as np

from mfgc.errors import DomainError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_m = m*T/M, m = 0..M."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise DomainError(f"Grid horizon must be positive, got {self.horizon}", self.horizon)
        if self.steps < 2:
            raise DomainError(f"Grid needs at least 2 steps, got {self.steps}", self.steps)

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    @property
    def size(self) -> int:
        return self.steps + 1

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.horizon, self.steps * factor)

    def coarsened(self, factor: int = 2) -> "TimeGrid":
        if self.steps % factor:
            raise DomainError(f"Cannot coarsen {self.steps} steps by {factor}", factor)
        return TimeGrid(self.horizon, self.steps // factor)

    @classmethod
    def from_dt(cls, horizon: float, dt: float) -> "TimeGrid":
        if not dt > 0:
            raise DomainError(f"Time step must be positive, got {dt}", dt)
        return cls(horizon, max(2, int(round(horizon / dt))))
