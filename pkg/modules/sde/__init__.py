from modules.sde.model import (
    Interpretation,
    DerivativeEstimate,
    SdeModel,
    finite_diff_gprime,
    to_ito,
    from_ito,
    convert,
)
