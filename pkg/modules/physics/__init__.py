from modules.physics.models import (
    LangevinParams,
    RelativisticParams,
    ModelTrio,
    kinetic_models,
    two_particle_models,
    relativistic_models,
    energy_from_momentum,
    lorentz_factor,
    trio_for,
)
from modules.physics.diagnostics import (
    DEFAULT_SCHEMES,
    RestStartRow,
    RestStartReport,
    levy_composite_brownian,
    delayed_rest_solution,
    rest_start_diagnostics,
    hitting_study,
)
