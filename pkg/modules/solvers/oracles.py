"""
Exact samplers used as references for the discretised schemes.

A Langevin velocity dV = -(gamma/m) V dt + (sigma/m) dW is an
Ornstein-Uhlenbeck process with Gaussian transitions. The kinetic energy
of one particle, or of two independent ones, is a squared OU process and
therefore exact in distribution at any grid time. It is also a squared
Bessel process of dimension 1 or 2 after a deterministic time change.
"""

import math
import logging

import numpy as np
from scipy.signal import lfilter

from modules.paths import SamplePath, SeedSpec
from modules.solvers.ensemble import HittingStats
from modules.solvers.engine import HitSpec
from modules.utils.errors import InvalidInputError

logger = logging.getLogger("noisecalc.solvers")


def _check_langevin(m, gamma, sigma):
    for name, value in (("m", m), ("gamma", gamma), ("sigma", sigma)):
        if not value > 0:
            raise InvalidInputError(f"{name} must be positive, got {value}")


def _ou_coefficients(h, m, gamma, sigma):
    decay = math.exp(-gamma * h / m)
    return decay, math.sqrt(sigma ** 2 / (2 * gamma * m) * (1 - decay ** 2))


def ou_transition(v, h, m, gamma, sigma, z):
    """V after a time h given V=v, driven by the standard normal draw z."""
    decay, sd = _ou_coefficients(h, m, gamma, sigma)
    return v * decay + sd * z


def exact_ou_path(m, gamma, sigma, v0, grid, seed):
    _check_langevin(m, gamma, sigma)
    z = seed.generator().standard_normal(grid.n_steps)
    steps = grid.steps
    values = np.empty(grid.points.size)
    values[0] = v0
    if steps.size and np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        decay, sd = _ou_coefficients(float(steps[0]), m, gamma, sigma)
        values[1:], _ = lfilter([sd], [1.0, -decay], z, zi=[decay * v0])
    else:
        for k, h in enumerate(steps):
            values[k + 1] = ou_transition(values[k], h, m, gamma, sigma, z[k])
    return SamplePath(grid, values)


def _component_seed(seed, delta, k):
    return SeedSpec(seed.master, seed.stream * delta + k, seed.branch)


def exact_kinetic_oracle(delta, m, gamma, sigma, v0s, grid, seed):
    """K = m/2 times the sum of squares of `delta` independent exact OU velocities."""
    v0s = list(np.atleast_1d(v0s))
    if delta not in (1, 2):
        raise InvalidInputError(f"kinetic oracle dimension must be 1 or 2, got {delta}")
    if len(v0s) != delta:
        raise InvalidInputError(f"dimension {delta} needs {delta} initial velocities, got {len(v0s)}")
    squares = sum(
        exact_ou_path(m, gamma, sigma, v0, grid, _component_seed(seed, delta, k)).values ** 2
        for k, v0 in enumerate(v0s)
    )
    return SamplePath(grid, 0.5 * m * squares)


def besq_time_change(t, m, gamma, sigma):
    """BESQ clock s(t) such that K_t = exp(-2 gamma t / m) * BESQ(s(t))."""
    _check_langevin(m, gamma, sigma)
    return sigma ** 2 / (4 * gamma) * np.expm1(2 * gamma * np.asarray(t, dtype=float) / m)


def besq_dimension(model_kind):
    kinds = {"single": 1, "langevin1": 1, "one": 1, "two": 2, "langevin2": 2, "pair": 2}
    try:
        return kinds[str(model_kind).lower()]
    except KeyError:
        raise InvalidInputError(f"no squared Bessel dimension for model kind '{model_kind}'") from None


def besq_moments(delta, x, s):
    """Mean and variance of a dimension-delta squared Bessel process started at x, at time s."""
    return x + delta * s, 2 * delta * s ** 2 + 4 * x * s


def oracle_hitting_time(delta, m, gamma, sigma, v0s, level, eps, cfg, block=4096):
    """
    Hitting statistics of the exact kinetic energy, streamed without storing paths.

    Path i consumes the same normal draws as exact_kinetic_oracle with
    seed cfg.path_seed(i); the grid must be uniform.
    """
    _check_langevin(m, gamma, sigma)
    v0s = np.atleast_1d(np.asarray(v0s, dtype=float))
    if v0s.size != delta:
        raise InvalidInputError(f"dimension {delta} needs {delta} initial velocities, got {v0s.size}")
    grid = cfg.grid
    decay, sd = _ou_coefficients(float(grid.steps[0]), m, gamma, sigma)
    k0 = 0.5 * m * float(np.sum(v0s ** 2))
    hit = HitSpec.for_start(level, eps, k0)
    times = grid.points
    n = grid.n_steps

    hit_times = np.full(cfg.n_paths, np.nan)
    for i in range(cfg.n_paths):
        if hit.reached(k0):
            hit_times[i] = times[0]
            continue
        gens = [_component_seed(cfg.path_seed(i), delta, k).generator() for k in range(delta)]
        v = v0s.copy()
        for start in range(0, n, block):
            stop = min(n, start + block)
            z = np.stack([g.standard_normal(stop - start) for g in gens])
            # V_{j+1} = decay * V_j + sd * z_j along each row
            vel, _ = lfilter([sd], [1.0, -decay], z, axis=1, zi=(decay * v)[:, None])
            energy = 0.5 * m * np.sum(vel ** 2, axis=0)
            reached = np.flatnonzero(hit.reached(energy))
            if reached.size:
                hit_times[i] = times[start + reached[0] + 1]
                break
            v = vel[:, -1]
    stats = HittingStats.from_times(level, eps, hit_times)
    logger.info(f"Oracle hitting (dimension {delta}): fraction {stats.fraction_hit:.4f}, mean {stats.mean_hit_time}")
    return stats
