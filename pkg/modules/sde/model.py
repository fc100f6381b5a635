import math
import logging
import dataclasses
from enum import Enum
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np

from modules.utils.errors import DomainEvaluationError, InvalidInputError
from modules.utils.numeric import evaluate, first_bad

logger = logging.getLogger("noisecalc.sde")


class Interpretation(Enum):
    ITO = "ito"
    STRATONOVICH = "stratonovich"
    HK = "hk"

    @property
    def offset(self):
        """Weight of g*dg/dx added to the drift to reach the Ito form."""
        return {"ito": 0.0, "stratonovich": 0.5, "hk": 1.0}[self.value]

    @classmethod
    def parse(cls, name):
        aliases = {
            "ito": cls.ITO,
            "stratonovich": cls.STRATONOVICH,
            "strat": cls.STRATONOVICH,
            "hk": cls.HK,
            "haenggi-klimontovich": cls.HK,
            "hanggi-klimontovich": cls.HK,
        }
        try:
            return aliases[str(name).strip().lower()]
        except KeyError:
            raise InvalidInputError(f"unknown interpretation '{name}'") from None


class DerivativeEstimate(NamedTuple):
    value: object
    one_sided: object


@dataclass(frozen=True)
class SdeModel:
    """
    dX = f(X, t) dt + g(X, t) dW under a given noise interpretation.

    domain is the open state interval (lo, hi); x0 may sit on its closure.
    gdgdx, when known, is the product g * dg/dx. It stays finite at edges
    where dg/dx alone does not (g = sqrt(2x) at 0).
    """

    drift: Callable
    diffusion: Callable
    interpretation: Interpretation = Interpretation.ITO
    domain: Tuple[float, float] = (-math.inf, math.inf)
    x0: float = 0.0
    dgdx: Optional[Callable] = None
    gdgdx: Optional[Callable] = None
    assumptions: str = ""

    def __post_init__(self):
        lo, hi = (float(v) for v in self.domain)
        if not lo < hi:
            raise InvalidInputError(f"empty domain ({lo}, {hi})")
        object.__setattr__(self, "domain", (lo, hi))
        object.__setattr__(self, "x0", float(self.x0))
        if not lo <= self.x0 <= hi:
            raise InvalidInputError(f"x0={self.x0} outside the closed domain [{lo}, {hi}]")
        if not isinstance(self.interpretation, Interpretation):
            object.__setattr__(self, "interpretation", Interpretation.parse(self.interpretation))

    @property
    def lo(self):
        return self.domain[0]

    @property
    def hi(self):
        return self.domain[1]

    def f(self, x, t=0.0):
        return evaluate(self.drift, x, t)

    def g(self, x, t=0.0):
        return evaluate(self.diffusion, x, t)

    def in_closure(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return (x >= self.lo - tol) & (x <= self.hi + tol)

    def noise_drift(self, x, t=0.0):
        """g * dg/dx, from the analytic forms when present."""
        if self.gdgdx is not None:
            return evaluate(self.gdgdx, x, t)
        g = self.g(x, t)
        if self.dgdx is not None:
            return g * evaluate(self.dgdx, x, t)
        return g * finite_diff_gprime(self.diffusion, x, t, domain=self.domain).value

    def with_drift(self, drift, interpretation):
        return dataclasses.replace(self, drift=drift, interpretation=interpretation)


def finite_diff_gprime(g, x, t=0.0, h=None, domain=(-math.inf, math.inf)):
    """
    Central difference of g in x; falls back to a one-sided stencil.

    The fallback happens where the central stencil leaves the domain or
    evaluates to a non-finite value. Accepts scalars or arrays.

    Returns:
        DerivativeEstimate: value and a matching one_sided flag
    """
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = domain
    outside = (x < lo) | (x > hi) | ~np.isfinite(x)
    if np.any(outside):
        i = first_bad(outside)
        raise DomainEvaluationError(f"derivative of g requested at x={x[i]} outside ({lo}, {hi})", x=float(x[i]), t=t)

    if h is None:
        h = np.maximum(1e-6, 1e-6 * np.abs(x))
    h = np.broadcast_to(np.asarray(h, dtype=float), x.shape)

    g_mid = evaluate(g, x, t)
    g_up = evaluate(g, x + h, t)
    g_down = evaluate(g, x - h, t)
    value = (g_up - g_down) / (2 * h)

    up_ok = (x + h <= hi) & np.isfinite(g_up)
    down_ok = (x - h >= lo) & np.isfinite(g_down)
    central = up_ok & down_ok
    forward = ~central & up_ok
    backward = ~central & ~up_ok & down_ok
    value = np.where(forward, (g_up - g_mid) / h, value)
    value = np.where(backward, (g_mid - g_down) / h, value)
    one_sided = ~central

    failed = ~(central | forward | backward) | ~np.isfinite(value)
    if np.any(failed):
        i = first_bad(failed)
        raise DomainEvaluationError(f"derivative of g is not finite at x={x[i]}", x=float(x[i]), t=t)
    if np.any(one_sided):
        logger.warning(f"one-sided difference for dg/dx at {int(one_sided.sum())} point(s), first x={x[first_bad(one_sided)]}")
    if scalar:
        return DerivativeEstimate(float(value[0]), bool(one_sided[0]))
    return DerivativeEstimate(value, one_sided)


def _checked_noise_drift(model, x, t):
    value = model.noise_drift(x, t)
    bad = ~np.isfinite(value)
    if np.any(bad):
        xs = np.broadcast_to(np.asarray(x, dtype=float), value.shape)
        i = first_bad(bad)
        raise DomainEvaluationError(f"g*dg/dx is not finite at x={xs.ravel()[i]}", x=float(xs.ravel()[i]), t=t)
    return value


def to_ito(model):
    if model.interpretation is Interpretation.ITO:
        return model
    c = model.interpretation.offset
    f = model.drift

    def ito_drift(x, t):
        return evaluate(f, x, t) + c * _checked_noise_drift(model, x, t)

    return model.with_drift(ito_drift, Interpretation.ITO)


def from_ito(model, target):
    target = target if isinstance(target, Interpretation) else Interpretation.parse(target)
    ito = to_ito(model)
    if target is Interpretation.ITO:
        return ito
    c = target.offset
    f = ito.drift

    def drift(x, t):
        return evaluate(f, x, t) - c * _checked_noise_drift(ito, x, t)

    return ito.with_drift(drift, target)


def convert(model, target):
    """Model with the same law under another interpretation."""
    target = target if isinstance(target, Interpretation) else Interpretation.parse(target)
    if target is model.interpretation:
        return model
    return from_ito(model, target)
