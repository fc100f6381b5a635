"""
Kinetic-energy equations of Langevin particles under the three noise
interpretations.

Every factory returns a ModelTrio whose Ito, Stratonovich and HK members
describe the same physical law: to_ito maps each member onto the Ito
one. They differ only in how the noise is read, which is what decides
what happens when the energy starts at its floor.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from modules.sde import Interpretation, SdeModel, finite_diff_gprime
from modules.utils.errors import DomainEvaluationError, InvalidInputError
from modules.utils.numeric import evaluate_unary


@dataclass(frozen=True)
class LangevinParams:
    m: float = 1.0
    gamma: float = 1.0
    sigma: float = 1.0
    v0: float = 0.0
    u0: Optional[float] = None

    def __post_init__(self):
        for name in ("m", "gamma", "sigma"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def velocities(self):
        return (self.v0,) if self.u0 is None else (self.u0, self.v0)


@dataclass(frozen=True)
class ModelTrio:
    family: str
    ito: SdeModel
    strat: SdeModel
    hk: SdeModel

    def members(self):
        return [self.ito, self.strat, self.hk]

    def __getitem__(self, interpretation):
        interpretation = interpretation if isinstance(interpretation, Interpretation) else Interpretation.parse(interpretation)
        return {
            Interpretation.ITO: self.ito,
            Interpretation.STRATONOVICH: self.strat,
            Interpretation.HK: self.hk,
        }[interpretation]


def _energy_trio(family, params, x0, ito_floor_drift, assumptions):
    """Members sharing g(K) = sqrt(2 sigma^2 K / m); the Ito drift at K=0 is ito_floor_drift."""
    m, gamma, s2 = params.m, params.gamma, params.sigma ** 2
    g = lambda k, t: np.sqrt(2.0 * s2 * k / m)
    gdgdx = lambda k, t: np.full(np.shape(k), s2 / m)
    noise = s2 / m

    def member(interpretation):
        floor = ito_floor_drift - interpretation.offset * noise
        drift = lambda k, t: floor - 2.0 * gamma * k / m
        return SdeModel(drift, g, interpretation, (0.0, math.inf), x0, gdgdx=gdgdx, assumptions=assumptions)

    return ModelTrio(family, member(Interpretation.ITO), member(Interpretation.STRATONOVICH), member(Interpretation.HK))


def kinetic_models(params):
    """K = m V^2 / 2 of one particle; the Ito drift is sigma^2/(2m) - 2 gamma K / m."""
    x0 = 0.5 * params.m * params.v0 ** 2
    return _energy_trio("langevin1", params, x0, params.sigma ** 2 / (2 * params.m),
                        "g is not Lipschitz at K=0")


def two_particle_models(params):
    """Total kinetic energy of two independent particles; Ito drift sigma^2/m - 2 gamma K / m."""
    u0 = 0.0 if params.u0 is None else params.u0
    x0 = 0.5 * params.m * (u0 ** 2 + params.v0 ** 2)
    return _energy_trio("langevin2", params, x0, params.sigma ** 2 / params.m,
                        "g is not Lipschitz at K=0")


def _constant_one(e):
    return np.ones_like(np.asarray(e, dtype=float))


@dataclass(frozen=True)
class RelativisticParams:
    """Natural units, c = 1. alpha and noise are functions of the energy."""

    M: float = 1.0
    alpha: Callable = _constant_one
    noise: Callable = _constant_one
    dnoise: Optional[Callable] = None
    p0: float = 0.0
    initial_energy: Optional[float] = None

    def __post_init__(self):
        if not self.M > 0:
            raise InvalidInputError(f"rest mass must be positive, got {self.M}")
        if self.initial_energy is not None and self.initial_energy < self.M:
            raise DomainEvaluationError(
                f"initial energy {self.initial_energy} is below the rest mass {self.M}", x=self.initial_energy
            )

    @property
    def energy0(self):
        if self.initial_energy is not None:
            return float(self.initial_energy)
        return energy_from_momentum(self.p0, self.M)


def energy_from_momentum(p, M):
    return np.sqrt(M ** 2 + np.asarray(p, dtype=float) ** 2) if np.ndim(p) else math.sqrt(M ** 2 + p ** 2)


def lorentz_factor(v):
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(v) >= 1):
        raise InvalidInputError("speed must be below 1 in natural units")
    out = 1.0 / np.sqrt(1.0 - v ** 2)
    return float(out) if out.ndim == 0 else out


def relativistic_models(params):
    """
    Energy P0 of a relativistic Brownian particle, domain (M, inf).

    With r = (M/P0)^2 and bracket (1 - r):
      Ito   -alpha P0 (1 - r) + (D / P0) r
      Strat (-D'/2 - alpha P0) (1 - r)
      HK    (-D' - alpha P0) (1 - r) - (D / P0) r
    and g = sqrt(2 D (1 - r)).

    Sign convention: the Stratonovich and HK drifts are the Ito drift minus
    1/2 and 1 times g g' = D' (1 - r) + 2 D M^2 / P0^3, so D' enters with
    a minus sign. A display with +D'/2 and +D' in the bracket describes a
    different law unless D is constant, where both forms coincide.
    """
    M = params.M

    def energy(e):
        e = np.asarray(e, dtype=float)
        if np.any(e < M - 1e-12):
            bad = e[e < M - 1e-12].ravel()[0]
            raise DomainEvaluationError(f"energy {bad} below the rest mass {M}", x=float(bad))
        return np.maximum(e, M)

    def alpha(e):
        return evaluate_unary(params.alpha, e)

    def noise(e):
        return evaluate_unary(params.noise, e)

    def dnoise(e):
        if params.dnoise is not None:
            return evaluate_unary(params.dnoise, e)
        if params.noise is _constant_one:
            return np.zeros_like(e)
        return finite_diff_gprime(lambda x, t: noise(x), e, 0.0, domain=(M, math.inf)).value

    def bracket(e):
        return 1.0 - (M / e) ** 2

    def g(e, t):
        e = energy(e)
        return np.sqrt(np.maximum(2.0 * noise(e) * bracket(e), 0.0))

    def gdgdx(e, t):
        e = energy(e)
        return dnoise(e) * bracket(e) + 2.0 * noise(e) * M ** 2 / e ** 3

    def ito(e, t):
        e = energy(e)
        return -alpha(e) * e * bracket(e) + noise(e) / e * (M / e) ** 2

    def strat(e, t):
        e = energy(e)
        return (-0.5 * dnoise(e) - alpha(e) * e) * bracket(e)

    def hk(e, t):
        e = energy(e)
        return (-dnoise(e) - alpha(e) * e) * bracket(e) - noise(e) / e * (M / e) ** 2

    x0 = params.energy0
    note = "g vanishes at P0 = M"
    return ModelTrio(
        "relativistic",
        SdeModel(ito, g, Interpretation.ITO, (M, math.inf), x0, gdgdx=gdgdx, assumptions=note),
        SdeModel(strat, g, Interpretation.STRATONOVICH, (M, math.inf), x0, gdgdx=gdgdx, assumptions=note),
        SdeModel(hk, g, Interpretation.HK, (M, math.inf), x0, gdgdx=gdgdx, assumptions=note),
    )


def trio_for(family, langevin=None, relativistic=None):
    builders = {
        "langevin1": lambda: kinetic_models(langevin or LangevinParams()),
        "langevin2": lambda: two_particle_models(langevin or LangevinParams()),
        "relativistic": lambda: relativistic_models(relativistic or RelativisticParams()),
    }
    try:
        return builders[family]()
    except KeyError:
        raise InvalidInputError(f"unknown model family '{family}'") from None
