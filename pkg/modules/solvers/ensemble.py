import math
import logging
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

import numpy as np

from modules.paths import SamplePath, SeedSpec, uniform_grid
from modules.solvers.engine import (
    Boundary,
    DrivenNoise,
    HitSpec,
    PathResult,
    SeededNoise,
    SolverScheme,
    check_scheme,
    integrate,
)
from modules.utils.config import worker_count
from modules.utils.errors import InvalidInputError
from modules.utils.io import json_number, write_csv

logger = logging.getLogger("noisecalc.solvers")

CHUNK_PATHS = 256
HIST_BINS = 40


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    dt: float
    horizon: float
    seed: SeedSpec
    boundary: Boundary = field(default_factory=Boundary.none)
    store_paths: bool = True
    threads: Optional[int] = None
    t0: float = 0.0

    def __post_init__(self):
        if int(self.n_paths) < 1:
            raise InvalidInputError(f"n_paths must be >= 1, got {self.n_paths}")
        if not self.dt > 0:
            raise InvalidInputError(f"dt must be positive, got {self.dt}")
        if not self.horizon >= self.dt * (1 - 1e-12):
            raise InvalidInputError(f"horizon {self.horizon} is shorter than dt {self.dt}")
        if not isinstance(self.seed, SeedSpec):
            object.__setattr__(self, "seed", SeedSpec(int(self.seed)))
        object.__setattr__(self, "n_paths", int(self.n_paths))

    @property
    def n_steps(self):
        return max(1, int(round(self.horizon / self.dt)))

    @property
    def grid(self):
        return uniform_grid(self.t0, self.t0 + self.horizon, self.n_steps)

    def path_seed(self, i):
        return self.seed.substream(i)


@dataclass
class HittingStats:
    level: float
    threshold: float
    n_paths: int
    fraction_hit: float
    mean_hit_time: Optional[float]
    ci95: Optional[float]
    n_terminated: int = 0

    @classmethod
    def from_times(cls, level, eps, hit_times, n_terminated=0):
        hit_times = np.asarray(hit_times, dtype=float)
        hits = hit_times[~np.isnan(hit_times)]
        n = hit_times.size
        mean = float(hits.mean()) if hits.size else None
        ci = float(1.96 * hits.std(ddof=1) / math.sqrt(hits.size)) if hits.size > 1 else None
        return cls(float(level), float(eps), n, hits.size / n if n else 0.0, mean, ci, int(n_terminated))

    def to_dict(self):
        return {
            "level": self.level,
            "threshold": self.threshold,
            "fraction": self.fraction_hit,
            "mean_time": json_number(self.mean_hit_time),
            "ci95": json_number(self.ci95),
            "n_terminated": self.n_terminated,
        }


@dataclass
class EnsembleSummary:
    n_paths: int
    dt: float
    horizon: float
    scheme: str
    interpretation: str
    terminal_mean: Optional[float]
    terminal_var: Optional[float]
    n_terminal: int
    violations: int
    reflections: int
    hist_edges: np.ndarray = None
    hist_density: np.ndarray = None
    hitting: Optional[HittingStats] = None

    def to_dict(self):
        hitting = self.hitting.to_dict() if self.hitting else {"fraction": None, "mean_time": None, "ci95": None}
        return {
            "n_paths": self.n_paths,
            "dt": self.dt,
            "horizon": self.horizon,
            "scheme": self.scheme,
            "interpretation": self.interpretation,
            "terminal_mean": json_number(self.terminal_mean),
            "terminal_var": json_number(self.terminal_var),
            "events": {"violations": self.violations, "reflections": self.reflections},
            "hitting": hitting,
        }

    def histogram_rows(self):
        if self.hist_edges is None:
            return []
        return [
            [float(lo), float(hi), float(d)]
            for lo, hi, d in zip(self.hist_edges[:-1], self.hist_edges[1:], self.hist_density)
        ]

    def write_histogram(self, target):
        return write_csv(target, ["bin_left", "bin_right", "density"], self.histogram_rows())


@dataclass
class EnsembleResult:
    paths: List[PathResult]
    summary: EnsembleSummary

    def terminal_values(self, include_terminated=False):
        return np.array([
            p.terminal for p in self.paths
            if include_terminated or not p.terminated_early
        ])


def summarize(paths, model, scheme, cfg, hitting=None):
    horizon_end = cfg.grid.end
    terminal = np.array([
        p.terminal for p in paths
        if not p.terminated_early and abs(p.end_time - horizon_end) <= 1e-9 * max(1.0, horizon_end)
    ])
    edges = density = None
    if terminal.size:
        lo, hi = terminal.min(), terminal.max()
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        density, edges = np.histogram(terminal, bins=HIST_BINS, range=(lo, hi), density=True)
    return EnsembleSummary(
        n_paths=len(paths),
        dt=cfg.dt,
        horizon=cfg.horizon,
        scheme=scheme.value,
        interpretation=model.interpretation.value,
        terminal_mean=float(terminal.mean()) if terminal.size else None,
        terminal_var=float(terminal.var(ddof=1)) if terminal.size > 1 else None,
        n_terminal=int(terminal.size),
        violations=sum(1 for p in paths if p.violated),
        reflections=sum(p.reflections for p in paths),
        hist_edges=edges,
        hist_density=density,
        hitting=hitting,
    )


def _run_chunks(model, scheme, cfg, hit=None, stop_on_hit=False):
    grid = cfg.grid
    starts = list(range(0, cfg.n_paths, CHUNK_PATHS))

    def run(start):
        seeds = [cfg.path_seed(i) for i in range(start, min(cfg.n_paths, start + CHUNK_PATHS))]
        return integrate(model, scheme, grid, SeededNoise(seeds, grid), cfg.boundary,
                         hit=hit, store=cfg.store_paths, stop_on_hit=stop_on_hit)

    workers = min(worker_count(cfg.threads), len(starts))
    if workers <= 1:
        chunks = [run(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run, starts))
    return [p for chunk in chunks for p in chunk]


def simulate_path(model, scheme, grid, seed, boundary=None):
    scheme = check_scheme(model, scheme)
    return integrate(model, scheme, grid, SeededNoise([seed], grid), boundary or Boundary.none())[0]


def simulate_driven(model, scheme, driver, boundary=None):
    """Simulate one path on a given Brownian driver."""
    if not isinstance(driver, SamplePath):
        raise InvalidInputError("driver must be a SamplePath")
    noise = DrivenNoise(driver.increments[None, :])
    return integrate(model, scheme, driver.grid, noise, boundary or Boundary.none())[0]


def simulate_batch_driven(model, scheme, grid, increments, boundary=None, store=True):
    """Simulate one path per row of Brownian increments on a shared grid."""
    increments = np.atleast_2d(increments)
    if increments.shape[1] != grid.n_steps:
        raise InvalidInputError(f"{increments.shape[1]} increments for {grid.n_steps} steps")
    return integrate(model, scheme, grid, DrivenNoise(increments), boundary or Boundary.none(), store=store)


def simulate_ensemble(model, scheme, cfg):
    scheme = check_scheme(model, scheme)
    logger.info(
        f"Ensemble start: {cfg.n_paths} paths, dt={cfg.dt}, T={cfg.horizon}, "
        f"scheme={scheme.value}, interpretation={model.interpretation.value}, boundary={cfg.boundary.kind}"
    )
    paths = _run_chunks(model, scheme, cfg)
    summary = summarize(paths, model, scheme, cfg)
    logger.info(
        f"Ensemble done: {summary.n_terminal} reached T, {summary.violations} violations, "
        f"{summary.reflections} reflections"
    )
    return EnsembleResult(paths, summary)


def simulate_reflected(model, scheme, interval, cfg):
    """Ensemble under a reflecting boundary on [a, b]; folds are logged as Reflection events."""
    a, b = (float(v) for v in interval)
    if not a < b:
        raise InvalidInputError(f"reflecting interval [{a}, {b}] is empty")
    if not a <= model.x0 <= b:
        raise InvalidInputError(f"x0={model.x0} outside [{a}, {b}]")
    reflected = McConfig(cfg.n_paths, cfg.dt, cfg.horizon, cfg.seed, Boundary.reflect(a, b),
                         cfg.store_paths, cfg.threads, cfg.t0)
    return simulate_ensemble(model, scheme, reflected)


def hitting_time(model, scheme, level, eps, cfg):
    """
    First time each path enters the band around `level`.

    From above the band is X <= level + eps, from below X >= level - eps.
    Paths that never enter it by the horizon are censored: they count in
    the fraction but not in the mean.
    """
    scheme = check_scheme(model, scheme)
    hit = HitSpec.for_start(level, eps, model.x0)
    lean = McConfig(cfg.n_paths, cfg.dt, cfg.horizon, cfg.seed, cfg.boundary, False, cfg.threads, cfg.t0)
    paths = _run_chunks(model, scheme, lean, hit=hit, stop_on_hit=True)
    times = [np.nan if p.hit_time is None else p.hit_time for p in paths]
    stats = HittingStats.from_times(level, eps, times, sum(1 for p in paths if p.terminated_early))
    logger.info(
        f"Hitting level {level} (band {eps}): fraction {stats.fraction_hit:.4f}, "
        f"mean {stats.mean_hit_time}, {stats.n_terminated} terminated"
    )
    return stats
