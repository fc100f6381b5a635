"""
Regularized backward integral of a step process against a Brownian path.

    I_eps = integral of Y_s (W_s - W_{s-eps}) / eps ds

W is taken piecewise linear between its samples and constant (W_0) before
its first time, so the time integral is computed exactly from the
cumulative integral of W. As eps shrinks the value tends to the
right-endpoint sum of the step levels against the increments of W.
"""

from dataclasses import dataclass

import numpy as np

from modules.paths import SamplePath
from modules.utils.errors import InvalidInputError

MAX_EPS_FRACTION = 0.1


@dataclass(frozen=True, eq=False)
class StepProcess:
    """Takes the value levels[i - 1] on (breakpoints[i - 1], breakpoints[i]]."""

    breakpoints: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        lv = np.asarray(self.levels, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise InvalidInputError("a step process needs at least two breakpoints")
        if np.any(np.diff(bp) <= 0):
            raise InvalidInputError("breakpoints must be strictly increasing")
        if lv.shape != (bp.size - 1,):
            raise InvalidInputError(f"{bp.size} breakpoints need {bp.size - 1} levels, got {lv.size}")
        if not np.all(np.isfinite(lv)):
            raise InvalidInputError("step levels must be finite")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "levels", lv)

    @classmethod
    def from_path(cls, path):
        """The adapted step process holding each sample until the next grid time."""
        return cls(path.grid.points, path.values[:-1])

    def right_sum(self, w):
        """Sum of levels times the increments of W between breakpoints."""
        return float(np.sum(self.levels * np.diff(w.at(self.breakpoints))))


def _cumulative_integral(w):
    t, v = w.grid.points, w.values
    h = np.diff(t)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (v[:-1] + v[1:]))])

    def integral(s):
        s = np.asarray(s, dtype=float)
        out = np.empty_like(s)
        before = s < t[0]
        out[before] = v[0] * (s[before] - t[0])
        inside = ~before
        k = np.clip(np.searchsorted(t, s[inside], side="right") - 1, 0, t.size - 2)
        u = s[inside] - t[k]
        slope = (v[k + 1] - v[k]) / h[k]
        out[inside] = cum[k] + v[k] * u + 0.5 * slope * u ** 2
        return out

    return integral


def backward_regularized(upsilon, w, eps):
    if not eps > 0:
        raise InvalidInputError(f"eps must be positive, got {eps}")
    if not isinstance(w, SamplePath) or w.grid.n_steps < 1:
        raise InvalidInputError("the integrator must be a sample path with at least one step")
    step = StepProcess.from_path(upsilon) if isinstance(upsilon, SamplePath) else upsilon
    horizon = w.grid.end - w.grid.start
    if eps > MAX_EPS_FRACTION * horizon * (1 + 1e-12):
        raise InvalidInputError(f"eps={eps} exceeds {MAX_EPS_FRACTION:.0%} of the horizon {horizon}")
    bp = step.breakpoints
    if bp[0] < w.grid.start or bp[-1] > w.grid.end:
        raise InvalidInputError("step process breakpoints leave the time span of the integrator")

    integral = _cumulative_integral(w)
    a, b = bp[:-1], bp[1:]
    cell = (integral(b) - integral(a)) - (integral(b - eps) - integral(a - eps))
    return float(np.sum(step.levels * cell) / eps)
