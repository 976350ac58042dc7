"""Super-convergent IMEX-Peer time integrators with variable step sizes.

Two-step s-stage Peer methods of order s+1 that keep the extra order under
step-size changes, with an A-stable implicit part.  The package ships the
method coefficients, the ratio-dependent coefficient machinery, stability
region computations, an adaptive integrator with local error control, the
standard benchmark problems and a CLI harness (``python -m imexpeer``).
"""

from .coeffs import (
    CONDITION_MODES,
    SigmaCoefficients,
    assemble,
    check_stage_order,
    check_superconvergence,
    compute_E1,
    compute_Q,
    defect,
    error_constants,
    extrapolation_defect,
    left_null_vector,
    sigma_polynomial,
    tilde_c,
)
from .integrator import Controller, IntegrationResult, integrate
from .problems import (
    SplitProblem,
    advection_reaction,
    burgers,
    dahlquist_split,
    fold_implicit,
    prothero_robinson,
    van_der_pol,
)
from .stability import (
    check_a_stability,
    damping_radius,
    imex_stability_matrix,
    implicit_stability_matrix,
    region_summary,
    scan_region,
)
from .tableau import (
    PeerTableau,
    TableauError,
    available_methods,
    builtin_tableau,
    check_zero_stability,
    load_tableau,
    save_tableau,
)

__version__ = "0.1.0"

__all__ = [
    "CONDITION_MODES",
    "Controller",
    "IntegrationResult",
    "PeerTableau",
    "SigmaCoefficients",
    "SplitProblem",
    "TableauError",
    "advection_reaction",
    "assemble",
    "available_methods",
    "builtin_tableau",
    "burgers",
    "check_a_stability",
    "check_stage_order",
    "check_superconvergence",
    "check_zero_stability",
    "compute_E1",
    "compute_Q",
    "dahlquist_split",
    "damping_radius",
    "defect",
    "error_constants",
    "extrapolation_defect",
    "fold_implicit",
    "imex_stability_matrix",
    "implicit_stability_matrix",
    "integrate",
    "left_null_vector",
    "load_tableau",
    "prothero_robinson",
    "region_summary",
    "save_tableau",
    "scan_region",
    "sigma_polynomial",
    "tilde_c",
    "van_der_pol",
    "__version__",
]
