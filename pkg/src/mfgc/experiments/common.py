"""
Shared plumbing of the experiment runners: config loading and hashing, output
layout, the cell work pool and deterministic table/report writers.
"""

import csv
import hashlib
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from mfgc.config import get_absolute_path
from mfgc.errors import ConfigError
from mfgc.game.model import CostModel, build_model
from mfgc.game.consistency import FixedPointConfig
from mfgc.grid import TimeGrid
from mfgc.lq.types import LqParams
from mfgc.schemas import ExperimentConfig, ModelSpec
from mfgc.sim.paths import SimConfig
from mfgc.solvers.fbode import SolverConfig

logger = logging.getLogger(__name__)

TABLE_NAME = "table.csv"
REPORT_NAME = "report.json"
PLOT_NAME = "plot.gp"


####################################
# Loading and hashing
####################################

def load_config(path: Path, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Read a TOML or JSON experiment config and apply CLI overrides.

    Raises:
        ConfigError: unreadable file, unknown suffix, parse error or schema violation
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigError(path, str(e)) from e

    suffix = path.suffix.lower()
    try:
        if suffix == ".toml":
            data = tomllib.loads(raw.decode("utf-8"))
        elif suffix == ".json":
            data = json.loads(raw)
        else:
            raise ConfigError(path, f"unsupported config format '{suffix}' (use .toml or .json)")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(path, f"parse error: {e}") from e

    if not isinstance(data, dict):
        raise ConfigError(path, "top level must be a table")
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(path, str(e)) from e


def config_hash(config: ExperimentConfig) -> str:
    """First 12 hex digits of the sha256 of the canonical JSON fingerprint."""
    canonical = json.dumps(config.fingerprint(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def output_dir(config: ExperimentConfig, digest: Optional[str] = None) -> Path:
    path = get_absolute_path(config.out) / config.experiment / (digest or config_hash(config))
    path.mkdir(parents=True, exist_ok=True)
    return path


####################################
# Builders shared by the runners
####################################

def make_grid(config: ExperimentConfig, steps: Optional[int] = None) -> TimeGrid:
    return TimeGrid(config.grid.horizon, steps or config.grid.steps)


def make_model(spec: ModelSpec) -> CostModel:
    return build_model(spec.name, **spec.params)


def lq_params(config: ExperimentConfig, **fields) -> LqParams:
    """LqParams of the configured LQ model on the configured horizon."""
    p = config.model.params
    base = dict(
        kappa=p["kappa"],
        gamma=p["gamma"],
        rho=p.get("rho", 0.0),
        horizon=config.grid.horizon,
        gaussian_init=(config.init.mu0, config.init.s0),
    )
    base.update(fields)
    return LqParams(**base)


def solver_config(config: ExperimentConfig, **fields) -> SolverConfig:
    spec = config.solver
    inner = FixedPointConfig(tol=spec.inner_tol) if spec.inner_tol is not None else None
    return SolverConfig(outer_tol=spec.outer_tol, max_outer_iters=spec.max_outer_iters, inner=inner, **fields)


def sim_config(config: ExperimentConfig, beta: float, seed: Optional[int] = None) -> SimConfig:
    """Monte Carlo settings at noise level beta; noiseless runs need a single path."""
    return SimConfig(
        beta=beta,
        n_paths=config.sim.n_paths if beta > 0 else 1,
        dt=config.sim.dt,
        seed=config.seed if seed is None else seed,
        antithetic=config.sim.antithetic,
    )


def cell_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for one experiment cell, keyed by (seed, *key)."""
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def draw_initial(config: ExperimentConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    """n draws from the configured m_0; Dirac positions are returned as given."""
    init = config.init
    if init.law == "dirac":
        return np.resize(np.asarray(init.positions, dtype=float), n)
    if init.law == "uniform":
        return rng.uniform(init.mu0 - init.half_width, init.mu0 + init.half_width, size=n)
    return rng.normal(init.mu0, 1.0 / (np.sqrt(2.0) * init.s0), size=n)


####################################
# Work pool
####################################

def run_cells(
    fn: Callable[[Hashable], Any],
    keys: Iterable[Hashable],
    threads: int = 1,
) -> List[Tuple[Hashable, Any]]:
    """Evaluate fn on every key, in a thread pool when threads > 1; results sorted by key."""
    keys = list(keys)
    if threads <= 1 or len(keys) <= 1:
        results = [(key, fn(key)) for key in keys]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(zip(keys, pool.map(fn, keys)))
    return sorted(results, key=lambda item: item[0])


####################################
# Writers
####################################

def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "" if value is None else str(value)


def write_table(path: Path, columns: Sequence[str], rows: Sequence[Dict[str, Any]], digest: str) -> Path:
    """CSV whose first line is '# config_hash=<digest>'; floats are written with repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(f"# config_hash={digest}\n")
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])
    return path


def jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def write_report(path: Path, report: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonable(report), indent=2, sort_keys=True) + "\n")
    return path


def r_squared(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float, float]:
    """(slope, intercept, R^2) of the least-squares line through (xs, ys)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sum((y - (slope * x + intercept)) ** 2))
    total = float(np.sum((y - y.mean()) ** 2))
    return float(slope), float(intercept), (1.0 - residual / total) if total > 0 else 1.0


####################################
# Outcome
####################################

@dataclass
class ExperimentOutcome:
    """What a runner hands back to the CLI."""
    experiment: str
    config_hash: str
    passed: bool
    directory: Path
    report: Dict[str, Any] = field(default_factory=dict)
    summary: List[str] = field(default_factory=list)
    result: Any = None

    @property
    def table_path(self) -> Path:
        return self.directory / TABLE_NAME

    @property
    def report_path(self) -> Path:
        return self.directory / REPORT_NAME

    @property
    def plot_path(self) -> Path:
        return self.directory / PLOT_NAME


def finish(
    config: ExperimentConfig,
    digest: str,
    directory: Path,
    passed: bool,
    report: Dict[str, Any],
    summary: List[str],
    result: Any = None,
) -> ExperimentOutcome:
    """Write report.json and wrap everything into an ExperimentOutcome."""
    report = {
        "experiment": config.experiment,
        "config_hash": digest,
        "seed": config.seed,
        "passed": passed,
        "config": config.fingerprint(),
        **report,
    }
    write_report(directory / REPORT_NAME, report)
    logger.info("%s finished (%s), outputs in %s", config.experiment, "pass" if passed else "fail", directory)
    return ExperimentOutcome(
        experiment=config.experiment,
        config_hash=digest,
        passed=passed,
        directory=directory,
        report=report,
        summary=summary,
        result=result,
    )
