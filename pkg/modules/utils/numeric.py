import numpy as np

from modules.utils.errors import DomainEvaluationError, NoiseCalcError


def _elementwise(fn, x, t):
    xs = x.ravel()
    ts = np.broadcast_to(np.asarray(t, dtype=float), x.shape).ravel()
    out = np.empty(xs.size)
    for i, (xi, ti) in enumerate(zip(xs, ts)):
        try:
            out[i] = fn(float(xi), float(ti))
        except NoiseCalcError:
            raise
        except ValueError as exc:
            # math.sqrt(-1), math.log(0), ...
            raise DomainEvaluationError(
                f"coefficient undefined at x={xi}, t={ti}: {exc}", x=float(xi), t=float(ti)
            ) from exc
    return out.reshape(x.shape)


def evaluate(fn, x, t=0.0):
    """
    Evaluate a coefficient function fn(x, t) over an array of states.

    Callables written for scalars (math.sqrt and friends) are retried
    element-wise; a math domain error there becomes a
    DomainEvaluationError at the first failing state. Scalar results are
    broadcast to the shape of x. Floating point warnings are suppressed;
    callers inspect the result for non-finite entries themselves.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        try:
            out = fn(x, t)
        except NoiseCalcError:
            raise
        except (TypeError, ValueError):
            out = _elementwise(fn, x, t)
        out = np.asarray(out, dtype=float)
    if out.shape != x.shape:
        out = np.broadcast_to(out, x.shape).copy()
    return out


def evaluate_unary(fn, x):
    """Same as evaluate for integrands that only take the state."""
    return evaluate(lambda u, _t: fn(u), x)


def first_bad(mask):
    """Index of the first True entry of a flat mask, or None."""
    hits = np.flatnonzero(np.ravel(mask))
    return int(hits[0]) if hits.size else None
