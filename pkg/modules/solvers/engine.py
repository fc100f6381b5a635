"""
Path integrator shared by every simulation entry point.

Paths are stepped together as numpy arrays. Each path draws its noise
from its own SeedSpec stream in blocks of time steps, so a batch, a
chunk of a batch or a single path all see the same increments.
"""

import math
import logging
from enum import Enum
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from modules.paths import SamplePath, TimeGrid
from modules.sde import Interpretation, to_ito
from modules.utils.errors import InvalidInputError

logger = logging.getLogger("noisecalc.solvers")

# distance outside the closed domain still treated as rounding
DOMAIN_TOL = 1e-12
BLOCK_STEPS = 512


class SolverScheme(Enum):
    EULER_MARUYAMA_ITO = "em_ito"
    DIRECT_LEFT = "direct_left"
    DIRECT_MIDPOINT_HEUN = "midpoint_heun"
    DIRECT_RIGHT_PC = "right_pc"

    @property
    def interpretation(self):
        """Interpretation a direct scheme realises; None for the converting scheme."""
        return {
            "em_ito": None,
            "direct_left": Interpretation.ITO,
            "midpoint_heun": Interpretation.STRATONOVICH,
            "right_pc": Interpretation.HK,
        }[self.value]

    @classmethod
    def parse(cls, name):
        aliases = {
            "em": cls.EULER_MARUYAMA_ITO, "em_ito": cls.EULER_MARUYAMA_ITO,
            "euler_maruyama": cls.EULER_MARUYAMA_ITO,
            "left": cls.DIRECT_LEFT, "direct_left": cls.DIRECT_LEFT,
            "heun": cls.DIRECT_MIDPOINT_HEUN, "midpoint": cls.DIRECT_MIDPOINT_HEUN,
            "midpoint_heun": cls.DIRECT_MIDPOINT_HEUN,
            "right": cls.DIRECT_RIGHT_PC, "right_pc": cls.DIRECT_RIGHT_PC, "rpc": cls.DIRECT_RIGHT_PC,
        }
        try:
            return aliases[str(name).strip().lower()]
        except KeyError:
            raise InvalidInputError(f"unknown solver scheme '{name}'") from None

    @classmethod
    def direct_for(cls, interpretation):
        return {
            Interpretation.ITO: cls.DIRECT_LEFT,
            Interpretation.STRATONOVICH: cls.DIRECT_MIDPOINT_HEUN,
            Interpretation.HK: cls.DIRECT_RIGHT_PC,
        }[interpretation]


@dataclass(frozen=True)
class Boundary:
    kind: str = "none"
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if self.kind not in ("none", "stop", "reflect"):
            raise InvalidInputError(f"unknown boundary mode '{self.kind}'")
        if self.kind == "reflect" and not self.lo < self.hi:
            raise InvalidInputError(f"reflecting interval [{self.lo}, {self.hi}] is empty")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def stop(cls):
        return cls("stop")

    @classmethod
    def reflect(cls, lo, hi=math.inf):
        return cls("reflect", float(lo), float(hi))

    def fold(self, x):
        """
        Fold states into [lo, hi] by repeated mirror reflection.

        Returns:
            tuple: folded states and the mask of states that were outside
        """
        outside = (x < self.lo) | (x > self.hi)
        if self.kind != "reflect" or not np.any(outside):
            return x, np.zeros(np.shape(x), dtype=bool)
        lo, hi = self.lo, self.hi
        with np.errstate(invalid="ignore"):
            if math.isfinite(lo) and math.isfinite(hi):
                width = hi - lo
                y = np.mod(x - lo, 2 * width)
                y = np.where(y > width, 2 * width - y, y)
                folded = lo + y
            elif math.isfinite(lo):
                folded = np.where(x < lo, 2 * lo - x, x)
            else:
                folded = np.where(x > hi, 2 * hi - x, x)
        return np.where(outside, folded, x), outside


class EventKind(Enum):
    DOMAIN_VIOLATION = "domain_violation"
    REFLECTION = "reflection"
    HIT_LEVEL = "hit_level"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    time: float
    value: float


@dataclass
class PathResult:
    path: SamplePath
    events: List[Event] = field(default_factory=list)
    terminated_early: bool = False
    hit_time: Optional[float] = None

    @property
    def violated(self):
        return any(e.kind is EventKind.DOMAIN_VIOLATION for e in self.events)

    @property
    def reflections(self):
        return sum(1 for e in self.events if e.kind is EventKind.REFLECTION)

    @property
    def terminal(self):
        return float(self.path.values[-1])

    @property
    def end_time(self):
        return self.path.grid.end


@dataclass(frozen=True)
class HitSpec:
    level: float
    eps: float
    from_above: bool

    @classmethod
    def for_start(cls, level, eps, x0):
        if not eps > 0:
            raise InvalidInputError(f"hitting band must be positive, got {eps}")
        return cls(float(level), float(eps), x0 >= level)

    def reached(self, x):
        if self.from_above:
            return x <= self.level + self.eps
        return x >= self.level - self.eps


class SeededNoise:
    """Brownian increments on a grid, one SeedSpec stream per path."""

    def __init__(self, seeds, grid):
        self.seeds = list(seeds)
        self.sqrt_steps = np.sqrt(grid.steps)
        self._gens = [None] * len(self.seeds)

    @property
    def n_paths(self):
        return len(self.seeds)

    def block(self, k0, k1, active):
        out = np.zeros((self.n_paths, k1 - k0))
        scale = self.sqrt_steps[k0:k1]
        for i in np.flatnonzero(active):
            if self._gens[i] is None:
                self._gens[i] = self.seeds[i].generator()
            out[i] = self._gens[i].standard_normal(k1 - k0) * scale
        return out


class DrivenNoise:
    """Given increments, shape (n_paths, n_steps)."""

    def __init__(self, increments):
        self.increments = np.atleast_2d(np.asarray(increments, dtype=float))

    @property
    def n_paths(self):
        return self.increments.shape[0]

    def block(self, k0, k1, active):
        return self.increments[:, k0:k1]


def check_scheme(model, scheme):
    scheme = scheme if isinstance(scheme, SolverScheme) else SolverScheme.parse(scheme)
    wanted = scheme.interpretation
    if wanted is not None and wanted is not model.interpretation:
        raise InvalidInputError(
            f"scheme {scheme.value} integrates {wanted.value} equations, model is {model.interpretation.value}"
        )
    return scheme


def _safe(fn, x, t):
    """Evaluate a coefficient; points that raise become nan."""
    try:
        return fn(x, t)
    except ArithmeticError:
        out = np.empty_like(x)
        for i, xi in enumerate(x):
            try:
                out[i] = fn(np.array([xi]), t)[0]
            except ArithmeticError:
                out[i] = np.nan
        return out


@dataclass
class _Batch:
    n_paths: int
    n_points: int
    store: bool
    x0: float

    def __post_init__(self):
        self.x = np.full(self.n_paths, self.x0)
        self.active = np.ones(self.n_paths, dtype=bool)
        self.end = np.full(self.n_paths, self.n_points - 1)
        self.terminated = np.zeros(self.n_paths, dtype=bool)
        self.hit_time = np.full(self.n_paths, np.nan)
        self.events = [[] for _ in range(self.n_paths)]
        self.values = None
        if self.store:
            self.values = np.full((self.n_paths, self.n_points), np.nan)
            self.values[:, 0] = self.x0

    def kill(self, idx, k, time, values, keep_state=None):
        """End paths idx at grid index k with a DomainViolation event."""
        for i, v in zip(idx, values):
            self.events[i].append(Event(EventKind.DOMAIN_VIOLATION, time, float(v)))
        self.active[idx] = False
        self.terminated[idx] = True
        self.end[idx] = k
        if keep_state is not None:
            self.x[idx] = keep_state


def _clamp(model, x):
    return np.clip(x, model.lo, model.hi)


def _violates(model, x):
    return ~model.in_closure(x, DOMAIN_TOL) | ~np.isfinite(x)


def integrate(model, scheme, grid, noise, boundary, hit=None, store=True, stop_on_hit=False):
    """
    Step a batch of paths of `model` on `grid`.

    Direct schemes use the model's own coefficients; the converting scheme
    steps the Ito form. A coefficient requested outside the closed domain
    (beyond DOMAIN_TOL) ends the path with a DomainViolation. Under a
    reflecting boundary, stage points and accepted states are folded first.

    Returns:
        list[PathResult]
    """
    scheme = check_scheme(model, scheme)
    stepped = to_ito(model) if scheme is SolverScheme.EULER_MARUYAMA_ITO else model
    times = grid.points
    n = grid.n_steps
    batch = _Batch(noise.n_paths, n + 1, store, model.x0)

    if hit is not None and hit.reached(model.x0):
        batch.hit_time[:] = times[0]
        for ev in batch.events:
            ev.append(Event(EventKind.HIT_LEVEL, float(times[0]), model.x0))
        if stop_on_hit:
            batch.active[:] = False
            batch.end[:] = 0

    for k0 in range(0, n, BLOCK_STEPS):
        if not batch.active.any():
            break
        k1 = min(n, k0 + BLOCK_STEPS)
        dw_block = noise.block(k0, k1, batch.active)
        for k in range(k0, k1):
            a = np.flatnonzero(batch.active)
            if a.size == 0:
                break
            _step(stepped, scheme, boundary, batch, a, k, times, dw_block[a, k - k0], hit, stop_on_hit)

    return _collect(batch, times)


def _step(model, scheme, boundary, batch, a, k, times, dw, hit, stop_on_hit):
    t = float(times[k])
    dt = float(times[k + 1] - times[k])
    x = batch.x[a]

    f = _safe(model.f, _clamp(model, x), t)
    g = _safe(model.g, _clamp(model, x), t)
    bad = _violates(model, x) | ~np.isfinite(f) | ~np.isfinite(g)
    if np.any(bad):
        batch.kill(a[bad], k, t, x[bad])
        a, x, f, g, dw = a[~bad], x[~bad], f[~bad], g[~bad], dw[~bad]
    x = _clamp(model, x)

    new = x + f * dt + g * dw
    if scheme in (SolverScheme.DIRECT_MIDPOINT_HEUN, SolverScheme.DIRECT_RIGHT_PC):
        if scheme is SolverScheme.DIRECT_MIDPOINT_HEUN:
            stage, ts = 0.5 * (x + new), t + 0.5 * dt
        else:
            stage, ts = new, t + dt
        stage, _ = boundary.fold(stage)
        gs = _safe(model.g, _clamp(model, stage), ts)
        bad = _violates(model, stage) | ~np.isfinite(gs)
        if np.any(bad):
            batch.kill(a[bad], k, t, stage[bad])
            a, x, f, gs, dw = a[~bad], x[~bad], f[~bad], gs[~bad], dw[~bad]
        new = x + f * dt + gs * dw

    t_next = float(times[k + 1])
    bad = ~np.isfinite(new)
    if np.any(bad):
        batch.kill(a[bad], k, t, new[bad])
        a, new = a[~bad], new[~bad]

    new, folded = boundary.fold(new)
    for i, v in zip(a[folded], new[folded]):
        batch.events[i].append(Event(EventKind.REFLECTION, t_next, float(v)))

    if boundary.kind == "stop":
        bad = _violates(model, new)
        if np.any(bad):
            if batch.store:
                batch.values[a[bad], k + 1] = new[bad]
            batch.kill(a[bad], k + 1, t_next, new[bad], keep_state=new[bad])
            a, new = a[~bad], new[~bad]

    inside = model.in_closure(new, DOMAIN_TOL)
    new = np.where(inside, _clamp(model, new), new)
    batch.x[a] = new
    if batch.store:
        batch.values[a, k + 1] = new

    if hit is not None:
        fresh = hit.reached(new) & np.isnan(batch.hit_time[a])
        for i, v in zip(a[fresh], new[fresh]):
            batch.hit_time[i] = t_next
            batch.events[i].append(Event(EventKind.HIT_LEVEL, t_next, float(v)))
        if stop_on_hit and np.any(fresh):
            batch.active[a[fresh]] = False
            batch.end[a[fresh]] = k + 1


def _collect(batch, times):
    results = []
    for i in range(batch.n_paths):
        end = int(batch.end[i])
        if batch.store:
            grid = TimeGrid(times[:end + 1])
            values = batch.values[i, :end + 1]
        elif end == 0:
            grid = TimeGrid(times[:1])
            values = [batch.x0]
        else:
            grid = TimeGrid([times[0], times[end]])
            values = [batch.x0, batch.x[i]]
        hit_time = None if np.isnan(batch.hit_time[i]) else float(batch.hit_time[i])
        results.append(PathResult(SamplePath(grid, values), batch.events[i], bool(batch.terminated[i]), hit_time))
    return results
