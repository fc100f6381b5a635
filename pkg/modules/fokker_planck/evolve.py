"""
Finite-volume evolution of the Fokker-Planck equation with zero-flux ends.

The flux is written J = A p - D dp/dx with D = g^2/2 and
A = f + (c - 1) g g', c being the interpretation offset (A = f for HK).
Interface fluxes use Scharfetter-Gummel exponential fitting: upwind where
advection dominates a cell and centred where diffusion does. The scheme is
a Markov generator, so explicit Euler below the stability bound keeps
densities non-negative and its discrete equilibrium is known in closed
form.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from modules.fokker_planck.density import GridDensity, check_diffusion_floor, relative_entropy
from modules.sde import Interpretation, finite_diff_gprime
from modules.utils.errors import InvalidInputError, NumericalError
from modules.utils.io import write_csv
from modules.utils.numeric import evaluate

logger = logging.getLogger("noisecalc.fokker_planck")

DIFFUSION_CFL = 0.4
RATE_CFL = 0.9


def bernoulli(w):
    """w / (exp(w) - 1), continuous at 0."""
    w = np.asarray(w, dtype=float)
    small = np.abs(w) < 1e-8
    safe = np.where(small, 1.0, w)
    return np.where(small, 1.0 - 0.5 * w, safe / np.expm1(safe))


@dataclass
class FpeProblem:
    f: Callable
    g: Callable
    a: float
    b: float
    initial: object
    n_cells: Optional[int] = None
    interpretation: Interpretation = Interpretation.HK
    gdgdx: Optional[Callable] = None
    c_min: float = field(init=False, default=0.0)

    def __post_init__(self):
        if not self.a < self.b:
            raise InvalidInputError(f"empty interval [{self.a}, {self.b}]")
        if not isinstance(self.interpretation, Interpretation):
            self.interpretation = Interpretation.parse(self.interpretation)
        if isinstance(self.initial, GridDensity):
            if (self.initial.a, self.initial.b) != (self.a, self.b):
                raise InvalidInputError("initial density lives on another interval")
            if self.n_cells is not None and self.n_cells != self.initial.n_cells:
                raise InvalidInputError("n_cells disagrees with the initial density")
            self.n_cells = self.initial.n_cells
        else:
            if self.n_cells is None:
                raise InvalidInputError("a point-mass start needs n_cells")
            self.initial = GridDensity.point_mass(self.a, self.b, int(self.n_cells), float(self.initial))
        xs = np.linspace(self.a, self.b, 8 * self.n_cells + 1)
        self.c_min = check_diffusion_floor(self.g, xs)

    @property
    def dx(self):
        return (self.b - self.a) / self.n_cells

    def interfaces(self):
        return self.a + self.dx * np.arange(1, self.n_cells)

    def centres(self):
        return self.a + self.dx * (np.arange(self.n_cells) + 0.5)

    def coefficients(self, x):
        """Advection A and diffusion D at the points x."""
        gv = evaluate(self.g, x)
        advection = evaluate(self.f, x)
        weight = self.interpretation.offset - 1.0
        if weight != 0.0:
            if self.gdgdx is not None:
                noise = evaluate(self.gdgdx, x)
            else:
                noise = gv * finite_diff_gprime(self.g, x, 0.0, domain=(self.a, self.b)).value
            advection = advection + weight * noise
        return advection, 0.5 * gv ** 2


class _Operator:
    """Interface transition rates of the discretised generator."""

    def __init__(self, problem):
        dx = problem.dx
        advection, diffusion = problem.coefficients(problem.interfaces())
        self.peclet = advection * dx / diffusion
        self.right = diffusion / dx ** 2 * bernoulli(-self.peclet)  # cell i -> i+1
        self.left = diffusion / dx ** 2 * bernoulli(self.peclet)    # cell i+1 -> i
        # the diffusion bound takes g^2 at interfaces and cell centres
        g2 = np.concatenate([2 * diffusion, evaluate(problem.g, problem.centres()) ** 2])
        self.max_g2 = float(np.max(g2))
        self.dx = dx

    def outflow(self):
        out = np.zeros(self.right.size + 1)
        out[:-1] += self.right
        out[1:] += self.left
        return out

    def dt_bound(self):
        bound = DIFFUSION_CFL * self.dx ** 2 / self.max_g2 if self.max_g2 > 0 else math.inf
        rate = self.outflow().max() if self.right.size else 0.0
        if rate > 0:
            bound = min(bound, RATE_CFL / rate)
        return bound

    def apply(self, p, dt):
        flux = np.zeros(p.size + 1)
        flux[1:-1] = self.right * p[:-1] - self.left * p[1:]
        return p - dt * (flux[1:] - flux[:-1])

    def equilibrium_log(self):
        """Zero-flux log-density: log p[i+1] - log p[i] = Peclet number of interface i."""
        logp = np.concatenate([[0.0], np.cumsum(self.peclet)])
        return logp - logp.max()


@dataclass
class FpeResult:
    final: GridDensity
    snapshots: List[Tuple[float, GridDensity]]
    equilibrium: GridDensity
    dt_bound: float
    dt: float
    n_steps: int

    def entropy_trace(self, reference=None):
        q = reference or self.equilibrium
        return [(t, relative_entropy(p, q)) for t, p in self.snapshots]

    def write_entropy_csv(self, target, reference=None):
        return write_csv(target, ["t", "H"], ([float(t), float(h)] for t, h in self.entropy_trace(reference)))


def admissible_dt(problem):
    return _Operator(problem).dt_bound()


def evolve_fpe(problem, dt, T, n_snapshots=11):
    """
    Evolve the initial density up to time T.

    The step actually taken is T / ceil(T / dt). Snapshots are kept at
    n_snapshots evenly spaced steps, both ends included.
    """
    if not dt > 0 or not T > 0:
        raise InvalidInputError(f"dt and T must be positive, got dt={dt}, T={T}")
    op = _Operator(problem)
    bound = op.dt_bound()
    if dt > bound:
        raise NumericalError(f"dt={dt} exceeds the stability bound {bound:.6g}", admissible=bound)

    n_steps = int(math.ceil(T / dt - 1e-9))
    step = T / n_steps
    log_eq = op.equilibrium_log()
    eq = np.exp(log_eq)
    equilibrium = GridDensity(problem.a, problem.b, eq / (eq.sum() * problem.dx), log_values=None)

    keep = set(np.linspace(0, n_steps, max(2, int(n_snapshots))).round().astype(int).tolist())
    p = np.array(problem.initial.values, dtype=float)
    mass0 = p.sum() * problem.dx
    snapshots = [(0.0, problem.initial)] if 0 in keep else []
    logger.info(f"FPE start: {problem.n_cells} cells, {n_steps} steps of {step:.3g} (bound {bound:.3g})")
    for k in range(1, n_steps + 1):
        p = op.apply(p, step)
        if k in keep:
            snapshots.append((k * step, GridDensity(problem.a, problem.b, p)))
    if not np.all(np.isfinite(p)):
        raise NumericalError("FPE solution became non-finite")
    final = GridDensity(problem.a, problem.b, p)
    logger.info(f"FPE done at T={T}: mass drift {abs(final.mass - mass0):.2e}")
    return FpeResult(final, snapshots, equilibrium, bound, step, n_steps)
