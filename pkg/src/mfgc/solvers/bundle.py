"""
Trajectory bundles and solver reports.

Binary layout (all little-endian):
    4s  magic "MFGC"
    I   format version
    I   mode (0 = N-player, 1 = mean-field particles)
    I   N, number of entities
    I   M, number of time steps
    d   horizon T
    then X, Y, A as float64 arrays of shape (N, M+1), row-major
"""

import csv
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional

import numpy as np

from mfgc.errors import DomainError
from mfgc.grid import TimeGrid

MAGIC = b"MFGC"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIId")


class BundleMode(str, Enum):
    NPLAYER = "nplayer"
    MEAN_FIELD_PARTICLES = "mean_field_particles"

    @property
    def code(self) -> int:
        return 0 if self is BundleMode.NPLAYER else 1

    @property
    def includes_self(self) -> bool:
        return self is BundleMode.MEAN_FIELD_PARTICLES


@dataclass(frozen=True)
class TrajectoryBundle:
    """States X, costates Y and controls A indexed by (entity, node)."""
    mode: BundleMode
    grid: TimeGrid
    X: np.ndarray
    Y: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        expected = (np.shape(self.X)[0] if np.ndim(self.X) == 2 else -1, self.grid.size)
        for name in ("X", "Y", "A"):
            if np.shape(getattr(self, name)) != expected:
                raise DomainError(
                    f"{name} has shape {np.shape(getattr(self, name))}, expected {expected}"
                )

    @property
    def n_entities(self) -> int:
        return self.X.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes

    def with_controls(self, A: np.ndarray) -> "TrajectoryBundle":
        return TrajectoryBundle(self.mode, self.grid, self.X, self.Y, np.asarray(A, dtype=float))

    def to_csv(self, path: Path) -> Path:
        """One row per (entity, node): entity, node, t, X, Y, A."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        times = self.times
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["entity", "node", "t", "X", "Y", "A"])
            for k in range(self.n_entities):
                for m, t in enumerate(times):
                    writer.writerow([
                        k, m, repr(float(t)),
                        repr(float(self.X[k, m])), repr(float(self.Y[k, m])), repr(float(self.A[k, m])),
                    ])
        return path

    def to_binary(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = _HEADER.pack(
            MAGIC, FORMAT_VERSION, self.mode.code, self.n_entities, self.grid.steps, self.grid.horizon
        )
        with open(path, "wb") as f:
            f.write(header)
            for arr in (self.X, self.Y, self.A):
                f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return path

    @classmethod
    def from_binary(cls, path: Path) -> "TrajectoryBundle":
        data = Path(path).read_bytes()
        if len(data) < _HEADER.size:
            raise DomainError(f"{path} is too short for a bundle header")
        magic, version, mode, n, steps, horizon = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise DomainError(f"{path} is not an MFGC bundle (magic={magic!r})")
        if version != FORMAT_VERSION:
            raise DomainError(f"Unsupported bundle version {version}", version)
        count = n * (steps + 1)
        arrays = np.frombuffer(data, dtype="<f8", count=3 * count, offset=_HEADER.size)
        X, Y, A = (arr.reshape(n, steps + 1).astype(float) for arr in np.split(arrays, 3))
        bundle_mode = BundleMode.NPLAYER if mode == 0 else BundleMode.MEAN_FIELD_PARTICLES
        return cls(bundle_mode, TimeGrid(horizon, steps), X, Y, A)


@dataclass
class SolveReport:
    """Outcome of an outer Picard solve."""
    outer_iterations: int = 0
    update_norm: float = float("inf")
    consistency_residual: float = float("inf")
    forward_defect: float = 0.0
    backward_defect: float = 0.0
    contraction_factor: float = 0.0
    converged: bool = False
    degeneracy_flag: bool = False
    damping: float = 1.0
    message: str = ""
    history: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "outer_iterations": self.outer_iterations,
            "update_norm": self.update_norm,
            "consistency_residual": self.consistency_residual,
            "forward_defect": self.forward_defect,
            "backward_defect": self.backward_defect,
            "contraction_factor": self.contraction_factor,
            "converged": self.converged,
            "degeneracy_flag": self.degeneracy_flag,
            "damping": self.damping,
            "message": self.message,
        }


@dataclass(frozen=True)
class Defects:
    forward: float
    backward: float
    consistency: float

    def max(self) -> float:
        return max(self.forward, self.backward, self.consistency)


@dataclass(frozen=True)
class StabilityResult:
    ratio: float
    numerator: float
    denominator: float
    degenerate: bool
    report_a: Optional[SolveReport] = None
    report_b: Optional[SolveReport] = None
