"""Holonomic gradient descent with exact-penalty constraints."""
from .errors import (
    EmptyData,
    HolonomicError,
    LineSearchFailed,
    SingularHessian,
    SingularPath,
    SingularPoint,
)
from .optimizer import (
    Constraint,
    ConstraintSet,
    IterationTrace,
    OptimizeResult,
    OptimizerConfig,
    PenaltyConfig,
    Status,
    affine_inequality,
    armijo_backtrack,
    ball_inequality,
    chgd_minimize,
    exact_penalty,
    hgd_minimize,
    linearized_penalty,
    newton_direction,
)
from .pfaffian import (
    IntegratorConfig,
    PfaffianSystem,
    StateVector,
    check_integrability,
    gradient,
    hessian,
    propagate,
)
from .vonmises import (
    AngleData,
    SufficientStats,
    VmParams,
    mle_direct_newton,
    sufficient_stats,
    vm_initial_state,
    vm_objective_oracle,
    vm_pfaffian_system,
    vm_sample,
)

__version__ = "0.1.0"
