from modules.fokker_planck.density import (
    GridDensity,
    Stability,
    CriticalKind,
    FixedPoint,
    CriticalPoint,
    ModeMatch,
    FixedPointReport,
    hk_drift,
    stationary_density,
    probability_flux,
    relative_entropy,
    analyze_fixed_points,
    critical_points,
    compare_modes,
)
from modules.fokker_planck.evolve import (
    FpeProblem,
    FpeResult,
    bernoulli,
    admissible_dt,
    evolve_fpe,
)
