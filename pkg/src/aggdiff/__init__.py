"""Lattice and continuum aggregation-diffusion simulation and verification toolkit."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    ALPHA,
    CANONICAL,
    BoundaryCondition,
    DomainError,
    ModelFunctions,
    bound_function_f,
    coupling_C,
    diffusivity_D,
    mobility_K,
)
from .lattice import (  # noqa: E402
    InvariantViolation,
    LatticeState,
    RegimeError,
    Trajectory,
    interior_mass,
    lattice_step,
    simulate,
    step_differences,
)
from .regions import check_region_monotone, forward_region  # noqa: E402
from .asymptotics import (  # noqa: E402
    CaseReport,
    classify_n4,
    detect_convergence,
    fit_decay_rate,
    predicted_limit_monotone,
    verify_n4,
)
from .continuum import (  # noqa: E402
    ContinuumState,
    DiagnosticsSample,
    illposedness_probe,
    min_principle_check,
    pde_simulate,
    pde_step,
    weak_energy,
    weak_form_residual,
)
