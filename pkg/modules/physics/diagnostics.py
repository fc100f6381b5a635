import logging
from dataclasses import dataclass, field, replace
from typing import Dict

import numpy as np

from modules.paths import SamplePath, SeedSpec
from modules.sde import Interpretation
from modules.solvers import (
    Boundary,
    McConfig,
    SolverScheme,
    hitting_time,
    ou_transition,
    simulate_ensemble,
)
from modules.utils.errors import InvalidInputError

logger = logging.getLogger("noisecalc.physics")

REST_TOL = 1e-12

DEFAULT_SCHEMES = {
    Interpretation.ITO: SolverScheme.EULER_MARUYAMA_ITO,
    Interpretation.STRATONOVICH: SolverScheme.DIRECT_MIDPOINT_HEUN,
    Interpretation.HK: SolverScheme.DIRECT_RIGHT_PC,
}


def levy_composite_brownian(u, v, b, w):
    """
    W~ = integral of (U dB + V dW) / sqrt(U^2 + V^2), as cumulative left sums.

    Where U = V = 0 the integrand is taken as (1, 0).
    """
    grid = u.grid
    for p in (v, b, w):
        if not p.grid.same_as(grid):
            raise InvalidInputError("composite Brownian motion needs all paths on one grid")
    uu, vv = u.values[:-1], v.values[:-1]
    radius = np.hypot(uu, vv)
    at_rest = radius == 0
    safe = np.where(at_rest, 1.0, radius)
    cu = np.where(at_rest, 1.0, uu / safe)
    cv = np.where(at_rest, 0.0, vv / safe)
    steps = cu * b.increments + cv * w.increments
    return SamplePath(grid, np.concatenate([[0.0], np.cumsum(steps)]))


def delayed_rest_solution(params, tau, grid, seed):
    """
    Two-particle kinetic energy held at zero until tau, then released.

    After tau both velocities are exact OU paths started at rest, so the
    energy follows the physical solution from zero. tau <= start gives
    the physical solution itself, tau >= end the trivial one.
    """
    times = grid.points
    energy = np.zeros(times.size)
    after = np.flatnonzero(times > tau)
    if after.size:
        start = max(float(tau), float(times[0]))
        clock = np.concatenate([[start], times[after]])
        total = np.zeros(after.size)
        for k in range(2):
            z = SeedSpec(seed.master, seed.stream * 2 + k, seed.branch).generator().standard_normal(after.size)
            vel = 0.0
            for j, h in enumerate(np.diff(clock)):
                vel = ou_transition(vel, h, params.m, params.gamma, params.sigma, z[j])
                total[j] += vel ** 2
        energy[after] = 0.5 * params.m * total
    return SamplePath(grid, energy)


@dataclass
class RestStartRow:
    interpretation: str
    scheme: str
    boundary: str
    drift_at_start: float
    diffusion_at_start: float
    interior_fraction: float
    violation_fraction: float
    stuck_fraction: float

    @property
    def first_step_sign(self):
        return int(np.sign(self.drift_at_start))

    def to_dict(self):
        return {
            "interpretation": self.interpretation,
            "scheme": self.scheme,
            "boundary": self.boundary,
            "first_step": {
                "drift": self.drift_at_start,
                "diffusion": self.diffusion_at_start,
                "sign": self.first_step_sign,
            },
            "rest_start": {
                "interior_fraction": self.interior_fraction,
                "violation_fraction": self.violation_fraction,
                "stuck_fraction": self.stuck_fraction,
            },
        }


@dataclass
class RestStartReport:
    family: str
    rows: Dict[Interpretation, RestStartRow] = field(default_factory=dict)

    def __getitem__(self, interpretation):
        return self.rows[interpretation]


def _rest_boundary(model, interpretation):
    if interpretation is Interpretation.HK:
        return Boundary.stop()
    return Boundary.reflect(model.lo, model.hi)


def rest_start_diagnostics(trio, dt=1e-3, n_seeds=1000, horizon=1.0, seed=None, threads=None, boundaries=None):
    """
    Start every member of a trio at its domain floor and watch what happens.

    Ito and Stratonovich members run with a reflecting wall at the floor,
    the HK member stops at its first domain violation; `boundaries`
    overrides this per interpretation.
    """
    seed = seed or SeedSpec(0)
    report = RestStartReport(trio.family)
    for interpretation in Interpretation:
        model = trio[interpretation]
        scheme = DEFAULT_SCHEMES[interpretation]
        boundary = (boundaries or {}).get(interpretation) or _rest_boundary(model, interpretation)
        cfg = McConfig(n_seeds, dt, horizon, seed, boundary, store_paths=True, threads=threads)
        result = simulate_ensemble(model, scheme, cfg)
        x0 = model.x0
        interior = violations = stuck = 0
        for path in result.paths:
            if path.violated:
                violations += 1
                continue
            x_end = path.terminal
            if model.lo < x_end < model.hi:
                interior += 1
            if np.all(np.abs(path.path.values - x0) <= REST_TOL):
                stuck += 1
        report.rows[interpretation] = RestStartRow(
            interpretation=interpretation.value,
            scheme=scheme.value,
            boundary=boundary.kind,
            drift_at_start=float(model.f(x0)),
            diffusion_at_start=float(model.g(x0)),
            interior_fraction=interior / n_seeds,
            violation_fraction=violations / n_seeds,
            stuck_fraction=stuck / n_seeds,
        )
        logger.info(
            f"{trio.family}/{interpretation.value}: interior {interior / n_seeds:.3f}, "
            f"violations {violations / n_seeds:.3f}, stuck {stuck / n_seeds:.3f}"
        )
    return report


def hitting_study(trio, level, eps, cfg, start=None):
    """Hitting statistics of `level` for each member, started at `start` (default: each member's x0)."""
    out = {}
    for interpretation in Interpretation:
        model = trio[interpretation]
        if start is not None:
            model = _restarted(model, start)
        boundary = _rest_boundary(model, interpretation)
        run = McConfig(cfg.n_paths, cfg.dt, cfg.horizon, cfg.seed, boundary, False, cfg.threads)
        out[interpretation] = hitting_time(model, DEFAULT_SCHEMES[interpretation], level, eps, run)
    return out


def _restarted(model, x0):
    return replace(model, x0=float(x0))
