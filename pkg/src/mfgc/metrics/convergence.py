"""
Empirical convergence errors between N-player equilibria and i.i.d.
mean-field copies, rate tables and slope fitting.
"""

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from mfgc.errors import DomainError
from mfgc.solvers.bundle import TrajectoryBundle

RATE_COLUMNS = ("N", "traj_error", "value_gap", "grad_gap", "K_N", "r_dq_N", "bound")


@dataclass(frozen=True)
class ConvergenceGap:
    traj_error: float
    rep_error: float
    value_gap: Optional[float] = None
    grad_gap: Optional[float] = None
    grad_gap_x: Optional[float] = None


def _box(nplayer: TrajectoryBundle, mf_iid: TrajectoryBundle, widen: float) -> Tuple[float, float]:
    """Evaluation box: the trajectory envelope scaled by `widen` about its center."""
    lo = min(nplayer.X.min(), mf_iid.X.min())
    hi = max(nplayer.X.max(), mf_iid.X.max())
    center, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    half = max(widen * half, 1.0)
    return center - half, center + half


def empirical_convergence_error(
    nplayer: TrajectoryBundle,
    mf_iid: TrajectoryBundle,
    lq=None,
    box: Optional[Tuple[float, float]] = None,
    widen: float = 3.0,
) -> ConvergenceGap:
    """
    traj_error = (1/N) sum_i [sup_m |X_i - X_hat_i|^2 + int |A_i - A_hat_i|^2 dt]
    rep_error  = max_i sup_m (|X_i - X_hat_i|^2 + |A_i - A_hat_i|^2)

    With lq = (LqNPlayerSolution, LqMfgSolution), also the value and gradient
    gaps max_i sup_{t, x in box} |w_i - v| and |D_x w_i - D_x v|. Both
    differences are affine in x because the Riccati coefficient is shared, so
    the sup over the box sits on its edges; grad_gap_x reports the
    x-coefficient of the gradient gap, which vanishes identically.
    """
    if nplayer.grid != mf_iid.grid:
        raise DomainError("bundles live on different time grids")
    if nplayer.n_entities != mf_iid.n_entities:
        raise DomainError(
            f"entity counts differ: {nplayer.n_entities} vs {mf_iid.n_entities}"
        )
    dX2 = (nplayer.X - mf_iid.X) ** 2
    dA2 = (nplayer.A - mf_iid.A) ** 2
    weights = np.full(nplayer.grid.size, nplayer.grid.dt)
    weights[[0, -1]] *= 0.5
    traj_error = float(np.mean(dX2.max(axis=1) + dA2 @ weights))
    rep_error = float(np.max(dX2 + dA2))

    if lq is None:
        return ConvergenceGap(traj_error=traj_error, rep_error=rep_error)

    sol_n, sol_mf = lq
    times = nplayer.times
    if sol_n.times.shape != times.shape or not np.allclose(sol_n.times, times, rtol=0, atol=1e-12):
        raise DomainError("the N-player LQ solution and the bundle use different grids")
    lo, hi = box or _box(nplayer, mf_iid, widen)

    dr = sol_n.r[None, :] - sol_mf.r(times)[None, :]
    dp = sol_n.p - sol_mf.p(times)[None, :]
    dq = sol_n.q - sol_mf.q(times)[None, :]
    value_gap = max(
        float(np.max(np.abs(0.5 * dr * x**2 + dp * x + dq))) for x in (lo, hi)
    )
    grad_gap = max(float(np.max(np.abs(dr * x + dp))) for x in (lo, hi))
    return ConvergenceGap(
        traj_error=traj_error,
        rep_error=rep_error,
        value_gap=value_gap,
        grad_gap=grad_gap,
        grad_gap_x=float(np.max(np.abs(dr))),
    )


####################################
# Slopes and orders
####################################

def fit_loglog_slope(xs: Sequence[float], ys: Sequence[float], discard_first: int = 0) -> float:
    """Least-squares slope of log y against log x after dropping the first points."""
    x = np.asarray(xs, dtype=float)[discard_first:]
    y = np.asarray(ys, dtype=float)[discard_first:]
    if x.size < 2:
        raise DomainError("a slope needs at least two points", x.size)
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("log-log fits need positive data")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def observed_order(errors: Sequence[float], steps: Sequence[int]) -> List[float]:
    """Orders p from successive refinements, e(M1)/e(M2) = (M2/M1)^p."""
    e = np.asarray(errors, dtype=float)
    m = np.asarray(steps, dtype=float)
    if e.size != m.size or e.size < 2:
        raise DomainError("need matching error and step lists of length >= 2")
    return [float(np.log(e[k] / e[k + 1]) / np.log(m[k + 1] / m[k])) for k in range(e.size - 1)]


####################################
# Rate table
####################################

@dataclass(frozen=True)
class RateRow:
    N: int
    traj_error: float
    value_gap: float
    grad_gap: float
    K_N: float
    r_dq_N: float
    bound: float


@dataclass
class RateTable:
    rows: List[RateRow] = field(default_factory=list)
    slopes: Dict[str, float] = field(default_factory=dict)

    def add(self, row: RateRow) -> None:
        if self.rows and row.N <= self.rows[-1].N:
            raise DomainError(f"N must increase strictly, got {row.N} after {self.rows[-1].N}")
        errors = (row.traj_error, row.value_gap, row.grad_gap, row.K_N)
        if any(not (e >= 0) for e in errors):
            raise DomainError(f"errors must be nonnegative, got {errors}")
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(row, name) for row in self.rows], dtype=float)

    def fit_slopes(self, discard_first: int = 1) -> Dict[str, float]:
        """Log-log slopes of every error column and of the theoretical bound against N."""
        discard = discard_first if len(self.rows) - discard_first >= 2 else 0
        Ns = self.column("N")
        for name in ("traj_error", "value_gap", "grad_gap", "r_dq_N", "bound"):
            values = self.column(name)
            if np.all(values > 0):
                self.slopes[name] = fit_loglog_slope(Ns, values, discard)
            else:
                self.slopes[name] = math.nan
        return self.slopes

    def to_csv(self, path: Path, header: Optional[str] = None) -> Path:
        """Rows in RATE_COLUMNS order; `header` goes first as a comment line."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            if header:
                f.write(f"# {header}\n")
            writer = csv.writer(f)
            writer.writerow(RATE_COLUMNS)
            for row in self.rows:
                values = asdict(row)
                writer.writerow([values["N"]] + [repr(float(values[c])) for c in RATE_COLUMNS[1:]])
        return path


def write_gnuplot_script(
    path: Path,
    csv_name: str,
    columns: Sequence[str],
    x_column: str = "N",
    title: str = "",
    logscale: bool = True,
) -> Path:
    """Plain gnuplot script plotting the named CSV columns against x_column."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        f"set title '{title}'",
        f"set xlabel '{x_column}'",
    ]
    if logscale:
        lines.append("set logscale xy")
    plots = [
        f"'{csv_name}' using (column('{x_column}')):(column('{c}')) with linespoints title '{c}'"
        for c in columns
    ]
    lines.append("plot " + ", \\\n     ".join(plots))
    path.write_text("\n".join(lines) + "\n")
    return path
