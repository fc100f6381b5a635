"""
Riemann-Stieltjes sums of a path against another path.

The three evaluation rules give the three stochastic integrals in the
limit of fine partitions: Left (Ito), Midpoint (Stratonovich) and Right
(Haenggi-Klimontovich). Midpoint sums use the even-indexed grid points as
the partition and evaluate at the grid point in between, so the working
grid must have an even number of steps. Dyadic refinements always do.
"""

import logging
from enum import Enum
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from modules.paths import SamplePath, VectorPath, dyadic_refinements
from modules.utils.errors import InvalidInputError, NumericalError
from modules.utils.io import write_csv
from modules.utils.numeric import evaluate, evaluate_unary

logger = logging.getLogger("noisecalc.integrals")


class EvaluationRule(Enum):
    LEFT = "left"
    MIDPOINT = "midpoint"
    RIGHT = "right"

    @classmethod
    def parse(cls, name):
        aliases = {"left": cls.LEFT, "ito": cls.LEFT,
                   "midpoint": cls.MIDPOINT, "mid": cls.MIDPOINT, "stratonovich": cls.MIDPOINT,
                   "right": cls.RIGHT, "hk": cls.RIGHT}
        try:
            return aliases[str(name).strip().lower()]
        except KeyError:
            raise InvalidInputError(f"unknown evaluation rule '{name}'") from None


@dataclass
class ConvergenceTable:
    rule: EvaluationRule
    rows: List[Tuple[int, float]] = field(default_factory=list)
    extrapolated: float = float("nan")
    diverged_at: Optional[int] = None

    @property
    def values(self):
        return np.array([v for _, v in self.rows])

    @property
    def n_steps(self):
        return [n for n, _ in self.rows]

    def to_csv(self, target):
        return write_csv(
            target, ["n_steps", "value"],
            ([int(n), float(v)] for n, v in self.rows),
            trailer=[f"extrapolated,{float(self.extrapolated)!r}"],
        )


def _check_shared(a, b):
    if not a.grid.same_as(b.grid):
        raise InvalidInputError("paths do not share a time grid")


def rule_points(grid, rule):
    """
    Indices (evaluation, partition) used by a rule on a grid.

    Returns:
        tuple: eval_idx, part_idx where cell j runs from part_idx[j] to part_idx[j+1]
               and is evaluated at eval_idx[j]
    """
    n = grid.n_steps
    if rule is EvaluationRule.MIDPOINT:
        if n % 2:
            raise InvalidInputError(f"midpoint sums need an even number of steps, got {n}")
        part = np.arange(0, n + 1, 2)
        mid = 0.5 * (grid.points[part[:-1]] + grid.points[part[1:]])
        # nearest grid point to each cell midpoint
        candidates = np.stack([part[:-1], part[:-1] + 1, part[1:]])
        dist = np.abs(grid.points[candidates] - mid)
        return candidates[np.argmin(dist, axis=0), np.arange(part.size - 1)], part
    part = np.arange(n + 1)
    if rule is EvaluationRule.LEFT:
        return part[:-1], part
    return part[1:], part


def stochastic_sum(phi, eval_path, integrator, rule):
    """Sum of phi(X at the rule point) times the integrator increment, over all cells."""
    _check_shared(eval_path, integrator)
    rule = rule if isinstance(rule, EvaluationRule) else EvaluationRule.parse(rule)
    if eval_path.grid.n_steps == 0:
        return 0.0
    idx, part = rule_points(eval_path.grid, rule)
    weights = evaluate_unary(phi, eval_path.values[idx])
    return float(np.sum(weights * np.diff(integrator.values[part])))


def realized_variation(path):
    return float(np.sum(path.increments ** 2))


def realized_cross_variation(x, y):
    _check_shared(x, y)
    return float(np.sum(x.increments * y.increments))


def hk_correction(dphi, path, g):
    """Trapezoid value of the integral of phi'(X) g(X, t)^2 dt along the path."""
    t = path.grid.points
    integrand = evaluate_unary(dphi, path.values) * evaluate(g, path.values, t) ** 2
    return float(trapezoid(integrand, t))


def refinement_levels(path, levels, seed, driver=None, resimulate=None):
    """
    The path at successive dyadic resolutions.

    A Brownian path is refined by the Brownian bridge. Any other diffusion
    needs its driving Brownian path and a resimulate(driver) callable: the
    driver is bridged and the diffusion is simulated again on it.
    """
    if levels < 0:
        raise InvalidInputError(f"refinement levels must be >= 0, got {levels}")
    if resimulate is None:
        return dyadic_refinements(path, levels, seed)
    if driver is None:
        raise InvalidInputError("resimulated refinement needs the driving Brownian path")
    _check_shared(path, driver)
    drivers = dyadic_refinements(driver, levels, seed)
    return [path] + [resimulate(w) for w in drivers[1:]]


def convergence_table(phi, path, levels, seed, rule, driver=None, resimulate=None):
    """Sums of phi(X) dX under one rule across dyadic refinements of one path."""
    rule = rule if isinstance(rule, EvaluationRule) else EvaluationRule.parse(rule)
    table = ConvergenceTable(rule)
    for level, refined in enumerate(refinement_levels(path, levels, seed, driver, resimulate)):
        if rule is EvaluationRule.MIDPOINT and refined.grid.n_steps % 2:
            continue
        value = stochastic_sum(phi, refined, refined, rule)
        if not np.isfinite(value):
            table.diverged_at = level
            logger.warning(f"{rule.value} sum diverged at level {level} ({refined.grid.n_steps} steps)")
            break
        table.rows.append((refined.grid.n_steps, value))
    if not table.rows:
        raise NumericalError("no finite sum at any refinement level")
    table.extrapolated = table.rows[-1][1]
    return table


def hk_integral(phi, path, refinement_levels, seed, driver=None, resimulate=None):
    return convergence_table(phi, path, refinement_levels, seed, EvaluationRule.RIGHT, driver, resimulate)


def _matrices(fn, values, t, vectorized, ndim):
    if vectorized:
        out = np.asarray(fn(values, t), dtype=float)
        if out.ndim == ndim - 1:
            out = np.broadcast_to(out, (values.shape[0],) + out.shape)
        return out
    return np.array([np.asarray(fn(v, s), dtype=float) for v, s in zip(values, t)])


def multidim_hk_sum(psi, path, rule, vectorized=False):
    """
    Sum of psi(X, t) . dX over the cells of a vector path.

    psi maps a state in R^m (and time) to a d x m matrix. With
    vectorized=True it receives all evaluation states at once, shape (n, m),
    with times shape (n,), and returns (n, d, m).
    """
    if not isinstance(path, VectorPath):
        raise InvalidInputError("multidimensional sums need a VectorPath")
    rule = rule if isinstance(rule, EvaluationRule) else EvaluationRule.parse(rule)
    if path.grid.n_steps == 0:
        raise InvalidInputError("path has no steps")
    idx, part = rule_points(path.grid, rule)
    mats = _matrices(psi, path.values[idx], path.grid.points[idx], vectorized, 3)
    m = path.dimension
    if mats.ndim != 3 or mats.shape[2] != m:
        raise InvalidInputError(f"integrand must be d x {m}, got shape {mats.shape[1:]}")
    dx = np.diff(path.values[part], axis=0)
    return np.einsum("jdm,jm->d", mats, dx)


def multidim_correction(dpsi, b, path, vectorized=False):
    """
    Trapezoid value of sum_l sum_k of the integral of (d_k psi)[:, l] b[l, k] dt.

    dpsi maps a state to the stack of partials, shape (m, d, m), with
    dpsi[k] the derivative of psi in x_k. b maps a state to the m x m
    matrix of cross-variation rates of the path.
    """
    if not isinstance(path, VectorPath):
        raise InvalidInputError("multidimensional corrections need a VectorPath")
    t = path.grid.points
    m = path.dimension
    partials = _matrices(dpsi, path.values, t, vectorized, 4)
    rates = _matrices(b, path.values, t, vectorized, 3)
    if partials.ndim != 4 or partials.shape[1] != m or partials.shape[3] != m:
        raise InvalidInputError(f"partials must have shape ({m}, d, {m}), got {partials.shape[1:]}")
    if rates.shape[1:] != (m, m):
        raise InvalidInputError(f"cross-variation matrix must be {m} x {m}, got {rates.shape[1:]}")
    integrand = np.einsum("nkdl,nlk->nd", partials, rates)
    return trapezoid(integrand, t, axis=0)
