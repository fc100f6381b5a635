from modules.integrals.sums import (
    EvaluationRule,
    ConvergenceTable,
    rule_points,
    stochastic_sum,
    realized_variation,
    realized_cross_variation,
    hk_correction,
    refinement_levels,
    convergence_table,
    hk_integral,
    multidim_hk_sum,
    multidim_correction,
)
from modules.integrals.backward import StepProcess, backward_regularized
