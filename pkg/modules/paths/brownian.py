"""
Time grids, sample paths and seeded Brownian motion.

Every random draw goes through a SeedSpec. A SeedSpec maps
(master, stream, branch...) to a numpy SeedSequence with
entropy=master and spawn_key=(stream, *branch), which seeds a Philox
counter-based generator. Streams never overlap, so an ensemble run in
parallel chunks reproduces the serial run bit for bit. Gaussians come from
numpy's ziggurat sampler (Generator.standard_normal).
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from modules.utils.errors import InvalidInputError
from modules.utils.io import write_csv

logger = logging.getLogger("noisecalc.paths")

MAX_MASTER = 2**64 - 1


def _frozen(values):
    values = np.array(values, dtype=float)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class TimeGrid:
    points: np.ndarray

    def __post_init__(self):
        points = _frozen(self.points)
        if points.ndim != 1 or points.size == 0:
            raise InvalidInputError("time grid needs a non-empty 1-D sequence of points")
        if not np.all(np.isfinite(points)):
            raise InvalidInputError("time grid points must be finite")
        if points[0] < 0:
            raise InvalidInputError(f"time grid starts at {points[0]} < 0")
        if points.size > 1 and np.any(np.diff(points) <= 0):
            bad = int(np.flatnonzero(np.diff(points) <= 0)[0])
            raise InvalidInputError(f"time grid not strictly increasing at index {bad + 1}")
        object.__setattr__(self, "points", points)

    @property
    def n_steps(self):
        return self.points.size - 1

    @property
    def steps(self):
        return np.diff(self.points)

    @property
    def diameter(self):
        return float(self.steps.max()) if self.n_steps else 0.0

    @property
    def start(self):
        return float(self.points[0])

    @property
    def end(self):
        return float(self.points[-1])

    def subdivide(self, factor):
        """Split every step into `factor` equal substeps; original points are kept exactly."""
        factor = int(factor)
        if factor < 1:
            raise InvalidInputError(f"subdivision factor must be >= 1, got {factor}")
        if factor == 1 or self.n_steps == 0:
            return self
        left = self.points[:-1, None]
        frac = np.arange(factor)[None, :] / factor
        inner = (left + frac * self.steps[:, None]).ravel()
        inner[::factor] = self.points[:-1]
        return TimeGrid(np.append(inner, self.points[-1]))

    def same_as(self, other):
        return self is other or (
            self.points.shape == other.points.shape and np.array_equal(self.points, other.points)
        )

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and self.same_as(other)

    def __hash__(self):
        return hash((self.n_steps, self.start, self.end))


def uniform_grid(t0, t1, n_steps):
    n_steps = int(n_steps)
    if n_steps < 1:
        raise InvalidInputError(f"n_steps must be >= 1, got {n_steps}")
    if not t1 > t0:
        raise InvalidInputError(f"empty time interval [{t0}, {t1}]")
    return TimeGrid(np.linspace(t0, t1, n_steps + 1))


@dataclass(frozen=True, eq=False)
class SamplePath:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != self.grid.points.shape:
            raise InvalidInputError(
                f"path has {values.size} values for {self.grid.points.size} grid points"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("path values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def times(self):
        return self.grid.points

    @property
    def increments(self):
        return np.diff(self.values)

    def at(self, t):
        """Piecewise-linear interpolation of the path at time(s) t."""
        return np.interp(t, self.grid.points, self.values)


@dataclass(frozen=True, eq=False)
class VectorPath:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim == 1:
            values = _frozen(values[:, None])
        if values.ndim != 2 or values.shape[0] != self.grid.points.size:
            raise InvalidInputError(
                f"vector path of shape {values.shape} does not fit {self.grid.points.size} grid points"
            )
        if values.shape[1] < 1:
            raise InvalidInputError("vector path needs at least one component")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("path values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def dimension(self):
        return self.values.shape[1]

    def component(self, k):
        return SamplePath(self.grid, self.values[:, k])

    @classmethod
    def stack(cls, paths):
        grid = paths[0].grid
        for path in paths[1:]:
            if not path.grid.same_as(grid):
                raise InvalidInputError("cannot stack paths on different grids")
        return cls(grid, np.column_stack([p.values for p in paths]))


@dataclass(frozen=True)
class SeedSpec:
    master: int
    stream: int = 0
    branch: tuple = field(default=())

    def __post_init__(self):
        if not 0 <= int(self.master) <= MAX_MASTER:
            raise InvalidInputError(f"master seed {self.master} is not a 64-bit unsigned integer")
        if int(self.stream) < 0:
            raise InvalidInputError(f"stream index must be non-negative, got {self.stream}")
        object.__setattr__(self, "master", int(self.master))
        object.__setattr__(self, "stream", int(self.stream))
        object.__setattr__(self, "branch", tuple(int(b) for b in self.branch))

    def generator(self):
        seq = np.random.SeedSequence(entropy=self.master, spawn_key=(self.stream, *self.branch))
        return np.random.Generator(np.random.Philox(seq))

    def child(self, *keys):
        """An independent stream derived from this one."""
        return SeedSpec(self.master, self.stream, self.branch + tuple(keys))

    def substream(self, index):
        return SeedSpec(self.master, index, self.branch)


def brownian_increments(grid, seed):
    """Gaussian increments with variance equal to each grid step."""
    z = seed.generator().standard_normal(grid.n_steps)
    return z * np.sqrt(grid.steps)


def generate_brownian(grid, seed):
    values = np.empty(grid.points.size)
    values[0] = 0.0
    np.cumsum(brownian_increments(grid, seed), out=values[1:])
    return SamplePath(grid, values)


def generate_brownian_vector(grid, m, seed):
    m = int(m)
    if m < 1:
        raise InvalidInputError(f"dimension must be >= 1, got {m}")
    columns = [
        generate_brownian(grid, SeedSpec(seed.master, seed.stream * m + k, seed.branch)).values
        for k in range(m)
    ]
    return VectorPath(grid, np.column_stack(columns))


def refine_bridge(path, factor, seed):
    """
    Subdivide each step of a Brownian path into `factor` substeps.

    New values follow the Brownian bridge between the retained endpoints,
    so the values at the original grid points are untouched.
    """
    factor = int(factor)
    if factor < 2:
        raise InvalidInputError(f"refinement factor must be >= 2, got {factor}")
    coarse = path.grid
    fine = coarse.subdivide(factor)
    n = coarse.n_steps
    if n == 0:
        return path

    h = coarse.steps[:, None]
    sub = np.diff(fine.points).reshape(n, factor)
    z = seed.generator().standard_normal((n, factor))
    free = np.cumsum(z * np.sqrt(sub), axis=1)
    # s/h at each substep end, relative to its own coarse step
    frac = np.cumsum(sub, axis=1) / h
    w_left = path.values[:-1, None]
    w_right = path.values[1:, None]
    bridge = w_left + free - frac * free[:, -1:] + frac * (w_right - w_left)

    values = np.empty(fine.points.size)
    values[:-1] = np.column_stack([path.values[:-1], bridge[:, :-1]]).ravel()
    values[-1] = path.values[-1]
    return SamplePath(fine, values)


def dyadic_refinements(path, levels, seed):
    """The path followed by `levels` successive 2x bridge refinements."""
    out = [path]
    for level in range(1, int(levels) + 1):
        out.append(refine_bridge(out[-1], 2, seed.child(level)))
    return out


def write_path_csv(path, target):
    if isinstance(path, VectorPath):
        header = ["t"] + [f"x{k + 1}" for k in range(path.dimension)]
        rows = ([float(t), *map(float, row)] for t, row in zip(path.grid.points, path.values))
    else:
        header = ["t", "value"]
        rows = ([float(t), float(v)] for t, v in zip(path.grid.points, path.values))
    return write_csv(target, header, rows)
