"""Implicit time stepping through accelerated explicit fixed-point iterations.

An implicit Euler step is characterized as the fixed point of the matching
explicit update with lagged nonlinearity; iterating that update and mixing
the iterates with Anderson acceleration solves the implicit problem without
assembling or preconditioning its Jacobian.
"""

from .anderson import AndersonConfig, AndersonWindow, aa_step, mixing_coefficients
from .fixedpoint import (
    FixedPointConfig,
    FixedPointReport,
    FixedPointStatus,
    solve_fixed_point,
)
from .linalg import (
    ConvergenceError,
    LinearOperator,
    cg_solve,
    gmres_solve,
    qr_least_squares,
)
from .problems import (
    BurgersParams,
    FHNParams,
    GridSpec,
    HeatProblem,
    PLaplacianParams,
    burgers_system,
    cfl_threshold,
    default_initial_field,
    fhn_picard_matrix_step,
    fhn_system,
    heat_system,
    initial_state,
    plaplacian_system,
)
from .timestep import (
    ExplicitEuler,
    GroundTruth,
    ImexFHN,
    Implicitized,
    IntegrationResult,
    ODESystem,
    SingularStepError,
    StepFailureError,
    StepRecord,
    TimeGrid,
    ground_truth_step,
    imex_step_fhn,
    implicitized_step,
    integrate,
    quasi_newton_step,
    step_map,
)

__version__ = "0.1.0"

__all__ = [
    "AndersonConfig",
    "AndersonWindow",
    "aa_step",
    "mixing_coefficients",
    "FixedPointConfig",
    "FixedPointReport",
    "FixedPointStatus",
    "solve_fixed_point",
    "ConvergenceError",
    "LinearOperator",
    "cg_solve",
    "gmres_solve",
    "qr_least_squares",
    "BurgersParams",
    "FHNParams",
    "GridSpec",
    "HeatProblem",
    "PLaplacianParams",
    "burgers_system",
    "cfl_threshold",
    "default_initial_field",
    "fhn_picard_matrix_step",
    "fhn_system",
    "heat_system",
    "initial_state",
    "plaplacian_system",
    "ExplicitEuler",
    "GroundTruth",
    "ImexFHN",
    "Implicitized",
    "IntegrationResult",
    "ODESystem",
    "SingularStepError",
    "StepFailureError",
    "StepRecord",
    "TimeGrid",
    "ground_truth_step",
    "imex_step_fhn",
    "implicitized_step",
    "integrate",
    "quasi_newton_step",
    "step_map",
]
