"""
Densities on a cell grid and the stationary law of a reflected diffusion.

For an HK equation on [a, b] with reflecting ends the stationary density
is proportional to exp(V), where V(x) is twice the integral of f/g^2 from
a to x. Ito and Stratonovich coefficients are first rewritten in HK form.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq
from scipy.special import rel_entr

from modules.sde import Interpretation, SdeModel, convert, finite_diff_gprime
from modules.utils.errors import InvalidInputError
from modules.utils.io import write_csv
from modules.utils.numeric import evaluate

logger = logging.getLogger("noisecalc.fokker_planck")

NEGATIVE_TOL = 1e-12
G_FLOOR = 1e-12
QUAD_REFINE = 8


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Cell values of a probability density on [a, b]."""

    a: float
    b: float
    values: np.ndarray
    log_values: Optional[np.ndarray] = None
    clipped: bool = False

    def __post_init__(self):
        if not self.a < self.b:
            raise InvalidInputError(f"empty interval [{self.a}, {self.b}]")
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise InvalidInputError("density needs a non-empty 1-D array of cell values")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("density values must be finite")
        clipped = self.clipped
        if np.any(values < -NEGATIVE_TOL):
            logger.warning(f"clipping {int(np.sum(values < -NEGATIVE_TOL))} negative cell(s), min {values.min():.3e}")
            clipped = True
        values = np.clip(values, 0.0, None)
        if clipped and values.sum() > 0:
            values = values / (values.sum() * (self.b - self.a) / values.size)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "clipped", clipped)

    @property
    def n_cells(self):
        return self.values.size

    @property
    def dx(self):
        return (self.b - self.a) / self.n_cells

    @property
    def centers(self):
        return self.a + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def mass(self):
        return float(self.values.sum() * self.dx)

    def normalized(self):
        mass = self.mass
        if mass <= 0:
            raise InvalidInputError("cannot normalise a density with zero mass")
        return GridDensity(self.a, self.b, self.values / mass)

    def same_grid(self, other):
        return self.n_cells == other.n_cells and self.a == other.a and self.b == other.b

    def l1_distance(self, other):
        if not self.same_grid(other):
            raise InvalidInputError("densities live on different grids")
        return float(np.sum(np.abs(self.values - other.values)) * self.dx)

    @classmethod
    def point_mass(cls, a, b, n_cells, x0):
        """All mass in the cell containing x0."""
        if not a <= x0 <= b:
            raise InvalidInputError(f"point mass at {x0} outside [{a}, {b}]")
        dx = (b - a) / n_cells
        values = np.zeros(n_cells)
        values[min(n_cells - 1, int((x0 - a) / dx))] = 1.0 / dx
        return cls(a, b, values)

    @classmethod
    def from_function(cls, a, b, n_cells, fn):
        dx = (b - a) / n_cells
        centers = a + (np.arange(n_cells) + 0.5) * dx
        return cls(a, b, evaluate(fn, centers)).normalized()

    def to_csv(self, target):
        return write_csv(target, ["x_center", "density"],
                         ([float(x), float(p)] for x, p in zip(self.centers, self.values)))


def _check_interval(a, b, n_cells):
    if not a < b:
        raise InvalidInputError(f"empty interval [{a}, {b}]")
    if int(n_cells) < 2:
        raise InvalidInputError(f"need at least 2 cells, got {n_cells}")


def hk_drift(f, g, interpretation=Interpretation.HK, a=-np.inf, b=np.inf, dgdx=None):
    """Drift of the HK equation with the same law as (f, g) under `interpretation`."""
    interpretation = interpretation if isinstance(interpretation, Interpretation) else Interpretation.parse(interpretation)
    if interpretation is Interpretation.HK:
        return f
    model = SdeModel(f, g, interpretation, domain=(a, b), x0=a if np.isfinite(a) else 0.0, dgdx=dgdx)
    return convert(model, Interpretation.HK).drift


def check_diffusion_floor(g, xs):
    gv = evaluate(g, xs)
    low = np.abs(gv) < G_FLOOR
    if np.any(low) or not np.all(np.isfinite(gv)):
        where = xs[np.flatnonzero(low | ~np.isfinite(gv))[0]]
        raise InvalidInputError(f"diffusion coefficient vanishes or is undefined at x={where}")
    return float(np.abs(gv).min())


def stationary_density(f, g, a, b, n_cells, interpretation=Interpretation.HK, dgdx=None):
    """
    Normalised stationary density at the cell centres.

    V is integrated by cumulative trapezoid from a on a sub-grid refined
    QUAD_REFINE times per cell and shifted by its maximum before
    exponentiation. log_values keeps the log-density.
    """
    _check_interval(a, b, n_cells)
    n_cells = int(n_cells)
    xs = np.linspace(a, b, QUAD_REFINE * n_cells + 1)
    check_diffusion_floor(g, xs)
    drift = hk_drift(f, g, interpretation, a, b, dgdx)
    integrand = 2.0 * evaluate(drift, xs) / evaluate(g, xs) ** 2
    potential = cumulative_trapezoid(integrand, xs, initial=0.0)[QUAD_REFINE // 2::QUAD_REFINE]
    shifted = potential - potential.max()
    dx = (b - a) / n_cells
    log_norm = np.log(np.sum(np.exp(shifted)) * dx)
    log_values = shifted - log_norm
    log_values.setflags(write=False)
    return GridDensity(a, b, np.exp(log_values), log_values=log_values)


def probability_flux(p, f, g, interpretation=Interpretation.HK, gdgdx=None):
    """
    J = (Ito drift) p - 1/2 d(g^2 p)/dx at the cell centres.

    Derivatives are second-order centred differences, one-sided at the ends.
    """
    interpretation = interpretation if isinstance(interpretation, Interpretation) else Interpretation.parse(interpretation)
    x = p.centers
    gv = evaluate(g, x)
    if gdgdx is not None:
        noise = evaluate(gdgdx, x)
    else:
        noise = gv * finite_diff_gprime(g, x, 0.0, domain=(p.a, p.b)).value
    drift = evaluate(f, x) + interpretation.offset * noise
    return drift * p.values - 0.5 * np.gradient(gv ** 2 * p.values, p.dx, edge_order=2)


def relative_entropy(p, q):
    """Sum of p ln(p/q) dx; +inf when q vanishes where p does not."""
    if not p.same_grid(q):
        raise InvalidInputError("relative entropy needs densities on one grid")
    terms = rel_entr(p.values, q.values)
    if np.any(np.isinf(terms)):
        logger.warning("relative entropy is infinite: reference density vanishes where p > 0")
        return float("inf")
    return float(np.sum(terms) * p.dx)


class Stability(Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    DEGENERATE = "degenerate"


class CriticalKind(Enum):
    MAX = "max"
    MIN = "min"


@dataclass(frozen=True)
class FixedPoint:
    x: float
    stability: Stability
    slope: float


@dataclass(frozen=True)
class CriticalPoint:
    x: float
    kind: CriticalKind


@dataclass(frozen=True)
class ModeMatch:
    fixed: float
    critical: Optional[float]
    distance: Optional[float]
    matched: bool


@dataclass
class FixedPointReport:
    fixed_points: List[FixedPoint]
    critical_points: List[CriticalPoint]
    matches: List[ModeMatch]
    tolerance: float = 0.0

    def xs(self, stability):
        return [fp.x for fp in self.fixed_points if fp.stability is stability]

    def critical(self, kind):
        return [cp.x for cp in self.critical_points if cp.kind is kind]

    @property
    def all_matched(self):
        return all(m.matched for m in self.matches)


def analyze_fixed_points(f, fprime, a, b, n_scan, xtol=1e-10, degenerate_tol=1e-8):
    """
    Zeros of f on [a, b] with their stability.

    Sign changes on an n_scan point grid are refined with brentq. Stability
    follows the sign of f' at the root; fprime=None uses a central difference.
    """
    if not a < b or int(n_scan) < 2:
        raise InvalidInputError("fixed point scan needs a < b and n_scan >= 2")
    xs = np.linspace(a, b, int(n_scan))
    fs = evaluate(f, xs)
    roots = list(xs[fs == 0])
    scalar_f = lambda u: float(evaluate(f, np.array([u]))[0])
    for k in np.flatnonzero(np.sign(fs[:-1]) * np.sign(fs[1:]) < 0):
        roots.append(brentq(scalar_f, xs[k], xs[k + 1], xtol=xtol))
    roots = sorted(roots)
    unique = []
    for r in roots:
        if not unique or r - unique[-1] > 10 * xtol:
            unique.append(float(r))

    points = []
    for r in unique:
        if fprime is not None:
            slope = float(evaluate(fprime, np.array([r]))[0])
        else:
            slope = float(finite_diff_gprime(f, np.array([r]), 0.0, domain=(a, b)).value[0])
        if abs(slope) < degenerate_tol:
            stability = Stability.DEGENERATE
        else:
            stability = Stability.STABLE if slope < 0 else Stability.UNSTABLE
        points.append(FixedPoint(r, stability, slope))
    logger.info(f"Found {len(points)} fixed point(s) on [{a}, {b}]")
    return FixedPointReport(points, [], [])


def critical_points(p):
    """Interior local maxima and minima of a grid density, from sign changes of its log-slope."""
    logp = p.log_values if p.log_values is not None else np.log(np.where(p.values > 0, p.values, np.nan))
    slope = np.sign(np.diff(logp))
    found = []
    for i in range(1, p.n_cells - 1):
        left, right = slope[i - 1], slope[i]
        if left > 0 and right < 0:
            found.append(CriticalPoint(float(p.centers[i]), CriticalKind.MAX))
        elif left < 0 and right > 0:
            found.append(CriticalPoint(float(p.centers[i]), CriticalKind.MIN))
    return found


def compare_modes(report, p_s):
    """Pair stable points with density maxima and unstable ones with minima, within one cell."""
    crit = critical_points(p_s)
    tol = p_s.dx * (1 + 1e-9)
    matches = []
    for fp in report.fixed_points:
        if fp.stability is Stability.DEGENERATE:
            continue
        kind = CriticalKind.MAX if fp.stability is Stability.STABLE else CriticalKind.MIN
        candidates = [c.x for c in crit if c.kind is kind]
        if not candidates:
            matches.append(ModeMatch(fp.x, None, None, False))
            continue
        nearest = min(candidates, key=lambda c: abs(c - fp.x))
        distance = abs(nearest - fp.x)
        matches.append(ModeMatch(fp.x, nearest, distance, distance <= tol))
    return FixedPointReport(report.fixed_points, crit, matches, tol)
