"""Radial self-similar profiles of the heat equation with exponential source."""

from .core import (
    Exponential,
    Infinite,
    Power,
    PowerApprox,
    ProblemParams,
    RadialProfile,
    Status,
    ValidationError,
    SolverError,
    fujita_exponent,
    joseph_lundgren_exponent,
    parse_nonlinearity,
    power_singular_constant,
    singular_stationary_value,
)
from .radial_ode import Adaptive, IntegratorConfig, Uniform, residual, solve_profile
from .asymptotics import certify_decay, estimate_L_integral, estimate_L_tail
from .shooting import classify_minimal, count_sign_changes, scan_alpha, solve_S_L
from .approx_family import convergence_report, verify_membership
from .sub_super import glue, glued_subsolution, glued_supersolution, standard_bumps, weak_inequality_check
from .pde_sim import (
    SimConfig,
    comparison_check,
    dichotomy_experiment,
    from_self_similar,
    scaling_invariance_check,
    simulate_cauchy,
    simulate_self_similar,
    to_self_similar,
    validate_growth_condition,
)

__version__ = "0.1.0"
