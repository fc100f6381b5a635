from modules.solvers.engine import (
    SolverScheme,
    Boundary,
    EventKind,
    Event,
    PathResult,
    HitSpec,
    DOMAIN_TOL,
    check_scheme,
    integrate,
)
from modules.solvers.ensemble import (
    McConfig,
    HittingStats,
    EnsembleSummary,
    EnsembleResult,
    simulate_path,
    simulate_driven,
    simulate_batch_driven,
    simulate_ensemble,
    simulate_reflected,
    hitting_time,
    summarize,
)
from modules.solvers.oracles import (
    ou_transition,
    exact_ou_path,
    exact_kinetic_oracle,
    besq_time_change,
    besq_dimension,
    besq_moments,
    oracle_hitting_time,
)
from modules.solvers.convergence import strong_errors, strong_convergence_order
