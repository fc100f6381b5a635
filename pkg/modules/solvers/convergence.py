import logging

import numpy as np

from modules.paths import generate_brownian, refine_bridge, uniform_grid
from modules.solvers.engine import Boundary, check_scheme, integrate, DrivenNoise
from modules.utils.errors import InvalidInputError, NumericalError

logger = logging.getLogger("noisecalc.solvers")


def _dyadic_factors(dts):
    factors = []
    for coarse, fine in zip(dts[:-1], dts[1:]):
        ratio = coarse / fine
        factor = int(round(ratio))
        if factor < 1 or abs(ratio - factor) > 1e-9 * ratio or factor & (factor - 1):
            raise InvalidInputError(f"time steps {coarse} and {fine} are not a dyadic refinement")
        factors.append(factor)
    return factors


def _terminals(model, scheme, drivers, boundary):
    grid = drivers[0].grid
    increments = np.stack([d.increments for d in drivers])
    results = integrate(model, scheme, grid, DrivenNoise(increments), boundary, store=False)
    return np.array([np.nan if r.terminated_early else r.terminal for r in results])


def strong_errors(model, scheme, dts, cfg, reference=None, reference_factor=8):
    """
    Mean absolute terminal error of a scheme at each time step.

    Every path is driven by one Brownian motion, sampled at the coarsest
    step and bridged down to the finer ones, so all resolutions share
    their noise; a repeated dt reuses the previous driver. The reference
    is the same scheme at dts[-1] / reference_factor, or reference(driver)
    when an exact solution of the driven equation is available.

    Returns:
        np.ndarray: one error per entry of dts
    """
    scheme = check_scheme(model, scheme)
    dts = [float(d) for d in dts]
    if len(dts) < 3:
        raise InvalidInputError(f"strong order needs at least 3 time steps, got {len(dts)}")
    factors = _dyadic_factors(dts)
    boundary = cfg.boundary or Boundary.none()
    n_coarse = int(round(cfg.horizon / dts[0]))
    coarse_grid = uniform_grid(cfg.t0, cfg.t0 + cfg.horizon, n_coarse)

    levels = [[] for _ in dts]
    finest = []
    for i in range(cfg.n_paths):
        seed = cfg.path_seed(i)
        driver = generate_brownian(coarse_grid, seed)
        levels[0].append(driver)
        for j, factor in enumerate(factors, start=1):
            if factor > 1:
                driver = refine_bridge(driver, factor, seed.child(j))
            levels[j].append(driver)
        if reference_factor > 1:
            driver = refine_bridge(driver, reference_factor, seed.child(len(dts)))
        finest.append(driver)

    if reference is None:
        exact = _terminals(model, scheme, finest, boundary)
    else:
        exact = np.array([float(reference(d)) for d in finest])

    errors = []
    for dt, drivers in zip(dts, levels):
        approx = _terminals(model, scheme, drivers, boundary)
        diff = np.abs(approx - exact)
        if np.all(np.isnan(diff)):
            raise NumericalError(f"every path failed at dt={dt}")
        errors.append(float(np.nanmean(diff)))
        logger.info(f"Strong error at dt={dt}: {errors[-1]:.3e}")
    return np.array(errors)


def strong_convergence_order(model, scheme, dts, cfg, reference=None, reference_factor=8):
    """Least-squares slope of log(strong error) against log(dt)."""
    if len(set(float(d) for d in dts)) < 2:
        raise InvalidInputError("a convergence slope needs at least two distinct time steps")
    errors = strong_errors(model, scheme, dts, cfg, reference, reference_factor)
    if np.any(errors <= 0):
        raise NumericalError("zero strong error; the reference coincides with a tested resolution")
    slope, _ = np.polyfit(np.log(dts), np.log(errors), 1)
    return float(slope)
